"""A small built-in web corpus for offline runs and tests.

`write_corpus(dir)` materializes the corpus in the on-disk layout the fixture
search engine and fetcher expect: an `index.json` with query and page
metadata, plus one HTML file per page named `{sha256(url)[:16]}.html`.

Page structure drives the offline extractors: `<h2>` headings open sections,
paragraphs provide descriptions, `Affected:`/`Benefit:`/`Obstacle:` prefixed
paragraphs carry structured fields, and `<li>` bullets carry evidence points.
"""

from __future__ import annotations

import json
import os

from .research import FixtureFetcher
from .util import atomic_write, dump_json

DEMO_STATEMENT = "Strengthening democratic governance worldwide"
DEMO_QUERY = "challenges to democratic governance and solutions"

_PROBLEM_PAGES = {
    "https://www.brookings.edu/articles/the-populist-challenge-to-liberal-democracy/": {
        "title": "The populist challenge to liberal democracy",
        "keywords": ["democratic", "governance", "democracy", "populism"],
        "body": """
<p>Surveys across established democracies point to two connected problems.</p>
<h2>Erosion of Public Trust</h2>
<p>Confidence in parliaments, courts and public agencies has fallen for a
decade, leaving citizens doubtful that democratic governance can deliver
results they can see.</p>
<p>Affected: Everyday citizens | loses faith that complaints lead to change;
stops reporting problems</p>
<p>Affected: Public servants | face hostility when enforcing rules; struggle
to recruit successors</p>
<h2>Rise in Political Polarization</h2>
<p>Partisan identity now shapes where people live, what they read and whom
they trust, making compromise across party lines look like betrayal rather
than democratic routine.</p>
<p>Affected: Local communities | neighbors stop cooperating on shared
services; school boards gridlock</p>
<p>Affected: Moderate legislators | lose primaries to hardliners; avoid
cross-party bills</p>
""",
    },
    "https://foreignpolicy.com/2022/01/07/10-ideas-fix-democracy/": {
        "title": "10 Ideas to Fix Democracy",
        "keywords": ["democracy", "democratic", "governance", "renewal"],
        "body": """
<p>Reformers disagree on remedies but largely agree on the diagnosis for
democratic governance.</p>
<h2>Weakening of Independent Institutions</h2>
<p>Oversight bodies, election commissions and courts are being starved of
budgets or stacked with loyalists, which removes the referees that
democratic governance depends on.</p>
<p>Affected: Election administrators | face staffing shortages; absorb legal
harassment</p>
<p>Affected: Judges and auditors | see rulings ignored; lose protection from
political retaliation</p>
<h2>Money and Influence in Politics</h2>
<p>Campaign spending and opaque lobbying give concentrated interests outsized
influence over agendas, crowding out the concerns of ordinary voters in a
democracy.</p>
<p>Affected: Small donors | feel contributions are pointless; disengage from
campaigns</p>
<p>Affected: Challenger candidates | cannot match incumbent war chests; drop
out early</p>
""",
    },
    "https://freedomhouse.org/report/freedom-world/2018/democracy-crisis": {
        "title": "Democracy in Crisis",
        "keywords": ["democracy", "democratic", "governance", "freedom"],
        "body": """
<p>Annual scoring shows democratic governance declining in every region.</p>
<h2>Spread of Disinformation Online</h2>
<p>False content travels faster than corrections across social platforms,
drowning out reliable reporting and leaving voters in a democracy unsure
what is true.</p>
<p>Affected: Voters | base choices on fabricated stories; distrust accurate
news</p>
<p>Affected: Independent journalists | get drowned out by coordinated
campaigns; face harassment</p>
<h2>Declining Civic Participation</h2>
<p>Voter turnout, party membership and volunteering keep sliding, so
democratic governance decisions are made by an ever smaller and less
representative group.</p>
<p>Affected: Young residents | feel politics ignores them; never form a
voting habit</p>
<p>Affected: Civic associations | lose members and funding; close local
chapters</p>
""",
    },
}

_SOLUTION_PAGES = {
    "https://example.org/trust-in-government-playbook": {
        "title": "Rebuilding Confidence Playbook",
        "keywords": [
            "erosion",
            "public",
            "trust",
            "confidence",
            "weakening",
            "independent",
            "institutions",
            "oversight",
        ],
        "body": """
<p>Field-tested programs for restoring faith in public bodies.</p>
<h2>Open Spending Dashboards</h2>
<p>Publish every public contract and expense in a searchable dashboard within
thirty days, so residents can follow the money without filing requests.</p>
<p>Benefit: Residents verify spending themselves, which rebuilds trust faster
than press releases.</p>
<p>Obstacle: Agencies must clean decades of inconsistent bookkeeping before
publishing.</p>
<h2>Independent Ombudsman Offices</h2>
<p>Create an ombudsman with subpoena power in each region who investigates
complaints against agencies and reports findings publicly twice a year.</p>
<p>Benefit: Citizens gain a referee whose findings agencies must answer in
public.</p>
<p>Obstacle: Incumbent officials resist creating a watchdog they cannot
control.</p>
<h2>Citizen Audit Panels</h2>
<p>Randomly selected residents join professional auditors to review one major
program each year and publish a plain-language verdict.</p>
<p>Benefit: Ordinary people see the books first-hand and vouch for the
process to their neighbors.</p>
<p>Obstacle: Panels need stipends and training budgets that councils rarely
set aside.</p>
""",
    },
    "https://example.org/depolarization-field-guide": {
        "title": "Common Ground Field Guide",
        "keywords": [
            "rise",
            "political",
            "polarization",
            "partisan",
            "spread",
            "disinformation",
            "online",
            "media",
        ],
        "body": """
<p>Interventions that reduce hostility between political camps.</p>
<h2>Cross-Partisan Dialogue Circles</h2>
<p>Pair residents from opposing camps in moderated small groups that meet
monthly around concrete local issues rather than national slogans.</p>
<p>Benefit: Participants report warmer views of the other side after three
sessions.</p>
<p>Obstacle: Recruiting beyond the already curious takes sustained outreach.</p>
<h2>Local News Revival Funds</h2>
<p>Match community donations to refill local newsrooms, restoring shared
facts about councils, schools and courts that national outlets skip.</p>
<p>Benefit: Shared local reporting gives rival camps one set of facts to
argue from.</p>
<p>Obstacle: Sustainable revenue remains unproven once grants run out.</p>
<h2>Platform Accuracy Prompts</h2>
<p>Require large platforms to show accuracy prompts and slow resharing of
unverified viral claims during election periods.</p>
<p>Benefit: Small friction measurably cuts the spread of fabricated stories.</p>
<p>Obstacle: Platforms fight mandates and measurement is contested.</p>
""",
    },
    "https://example.org/civic-innovation-handbook": {
        "title": "Civic Innovation Handbook",
        "keywords": [
            "declining",
            "civic",
            "participation",
            "voter",
            "turnout",
            "money",
            "influence",
            "politics",
            "campaign",
        ],
        "body": """
<p>Practical ways to widen who takes part in public decisions.</p>
<h2>Participatory Budgeting Programs</h2>
<p>Let residents propose and vote on how a share of the municipal budget is
spent, with binding results published street by street.</p>
<p>Benefit: People who allocate money once keep showing up for other
decisions.</p>
<p>Obstacle: Finance departments fear losing control of allocations.</p>
<h2>Small Donor Matching Funds</h2>
<p>Match small campaign contributions from local residents six to one so
candidates court neighborhoods instead of large checks.</p>
<p>Benefit: Candidates spend their time with ordinary constituents, diluting
big-money influence.</p>
<p>Obstacle: Match pools require stable public funding across election
cycles.</p>
<h2>Civic Duty School Curriculum</h2>
<p>Teach budgeting, council procedure and local reporting in secondary
schools, with each class presenting one proposal to the council yearly.</p>
<p>Benefit: Voting and participation habits form before adulthood and
persist.</p>
<p>Obstacle: Crowded curricula leave little room without statutory backing.</p>
""",
    },
}

_EVIDENCE_PAGES = {
    "https://example.org/policy-evidence-dossier": {
        "title": "Policy Evidence Dossier",
        "keywords": ["evidence", "category", "policy", "impact", "risks"],
        "body": """
<p>Collected findings organized for policy review boards.</p>
<h2>Policy Risks</h2>
<ul>
<li>Technical and human capacity or readiness can pose challenges</li>
<li>Budget overruns appear in roughly one third of comparable programs</li>
<li>Early wins can fade once pilot funding and attention move on</li>
</ul>
<h2>Case Studies</h2>
<ul>
<li>A coastal city cut complaint backlogs by half within two years of
adopting open dashboards</li>
<li>A regional ombudsman recovered misallocated funds exceeding its own
annual budget</li>
</ul>
<h2>Expert Opinions</h2>
<ul>
<li>Program evaluators stress independent baselines before launch</li>
<li>Administrative scholars warn that disclosure without enforcement rarely
changes behavior</li>
</ul>
<h2>Public Opinions</h2>
<ul>
<li>Survey majorities support transparency requirements across party lines</li>
<li>Focus groups trust outcomes more when residents help run the process</li>
</ul>
<h2>Historical Context</h2>
<ul>
<li>Earlier reform waves succeeded where statutes named a responsible
office</li>
<li>Reforms passed after scandals tended to outlast their sponsors</li>
</ul>
<h2>Long Term Impact</h2>
<ul>
<li>Institutionalized programs show compounding participation gains after
five years</li>
</ul>
<h2>Short Term Impact</h2>
<ul>
<li>Visible early deliverables buy patience for slower structural work</li>
</ul>
<h2>Ethical Considerations</h2>
<ul>
<li>Publishing granular records can expose vulnerable individuals without
careful redaction</li>
</ul>
""",
    },
}

PAGES: dict[str, dict] = {**_PROBLEM_PAGES, **_SOLUTION_PAGES, **_EVIDENCE_PAGES}

QUERIES: dict[str, list[str]] = {
    DEMO_QUERY: list(_PROBLEM_PAGES.keys()),
}


page_filename = FixtureFetcher.page_filename


def page_html(url: str) -> str:
    meta = PAGES[url]
    return (
        "<html><head><title>"
        + meta["title"]
        + "</title></head><body>"
        + meta["body"]
        + "</body></html>"
    )


def write_corpus(corpus_dir: str) -> str:
    """Write the demo corpus into corpus_dir; returns the directory path."""
    os.makedirs(corpus_dir, exist_ok=True)
    index = {
        "queries": QUERIES,
        "pages": {
            url: {"title": meta["title"], "keywords": meta["keywords"]}
            for url, meta in PAGES.items()
        },
    }
    atomic_write(os.path.join(corpus_dir, "index.json"), dump_json(index) + "\n")
    for url in PAGES:
        atomic_write(os.path.join(corpus_dir, page_filename(url)), page_html(url))
    return corpus_dir


if __name__ == "__main__":
    import sys

    target = sys.argv[1] if len(sys.argv) > 1 else "corpus"
    print(json.dumps({"corpus_dir": write_corpus(target), "pages": len(PAGES)}))
