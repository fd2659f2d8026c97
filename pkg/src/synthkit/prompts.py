"""Prompt template registry.

Every provider-bound prompt in the system lives here as a named template
with {{placeholder}} slots. Templates are tagged with the module that owns
them so reuse constraints can be audited (e.g. evidence gathering must issue
only research-owned prompt families). Placeholders use doubled braces so
JSON examples inside prompt bodies never collide with substitution.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .model import AffectedEntity, Policy, Solution

_SLOT_RE = re.compile(r"\{\{([a-z_]+)\}\}")


class PromptError(ValueError):
    pass


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    owner: str  # module that owns this prompt family
    system: str
    user: str

    def slot_names(self) -> set[str]:
        return set(_SLOT_RE.findall(self.system)) | set(_SLOT_RE.findall(self.user))


@dataclass
class RenderedPrompt:
    template: str
    owner: str
    system: str
    user: str
    slots: dict = field(default_factory=dict)


REGISTRY: dict[str, PromptTemplate] = {}


def _register(template: PromptTemplate) -> PromptTemplate:
    if template.name in REGISTRY:
        raise PromptError(f"duplicate template name: {template.name}")
    REGISTRY[template.name] = template
    return template


def render(name: str, **slots: str) -> RenderedPrompt:
    """Substitute slots into the named template.

    Unbound placeholders and unknown slot names are both errors; silent
    partial substitution has bitten enough pipelines to be worth the strict
    check.
    """
    try:
        template = REGISTRY[name]
    except KeyError:
        raise PromptError(f"unknown prompt template: {name}") from None
    wanted = template.slot_names()
    given = set(slots)
    missing = wanted - given
    if missing:
        raise PromptError(f"{name}: unbound placeholders: {sorted(missing)}")
    extra = given - wanted
    if extra:
        raise PromptError(f"{name}: unknown slots: {sorted(extra)}")

    def fill(text: str) -> str:
        return _SLOT_RE.sub(lambda m: str(slots[m.group(1)]), text)

    return RenderedPrompt(
        template=name,
        owner=template.owner,
        system=fill(template.system),
        user=fill(template.user),
        slots={k: str(v) for k, v in slots.items()},
    )


def owner_of(name: str) -> str:
    return REGISTRY[name].owner


# --------------------------------------------------------------------------
# Shared fragments

# Default framing for who will carry a solution forward; projects can
# override it with their own ranking guidance.
DEFAULT_INTEREST_INSTRUCTION = (
    "Keep in mind that the solution components will be implemented by"
    " philanthropic organizations in partnership with civil society"
    " organizations, community-based organizations, and legal advocacy groups."
)

SOLUTION_JSON_SCHEMA = (
    "{ title: string, description: string, mainBenefitOfSolution: string,"
    " mainObstacleToSolutionAdoption: string }"
)

# Strength tiers for the mutation operator, surfaced in the prompt.
MUTATION_RATE_INSTRUCTIONS = {
    "low": "Implement mutations corresponding to a low mutation rate, making only small refinements.",
    "medium": "Implement mutations corresponding to a medium mutation rate, making moderate changes.",
    "high": "Implement mutations corresponding to a high mutation rate.",
}


def format_entities(entities: list[AffectedEntity]) -> str:
    if not entities:
        return "(none identified)"
    parts = []
    for ent in entities:
        block = ent.name
        if ent.negative_effects:
            effects = "\n\n".join(ent.negative_effects)
            block += f"\n\nNegative Effects:\n\n{effects}"
        parts.append(block)
    return "\n\n".join(parts)


def solution_json(sol: Solution) -> str:
    return json.dumps(
        {
            "title": sol.title,
            "description": sol.description,
            "mainBenefitOfSolution": sol.main_benefit,
            "mainObstacleToSolutionAdoption": sol.main_obstacle,
        },
        indent=2,
        ensure_ascii=False,
    )


def component_text(item) -> str:
    """The text block a pairwise voter sees for one item."""
    return f"{item.title}\n\n{item.description}"


def top_pro(item) -> str:
    pros = getattr(item, "pros", [])
    return pros[0] if pros else "None listed yet."


def top_con(item) -> str:
    cons = getattr(item, "cons", [])
    return cons[0] if cons else "None listed yet."


# --------------------------------------------------------------------------
# ranking-owned templates

_register(
    PromptTemplate(
        name="pairwise_solution",
        owner="ranking",
        system=(
            "You're an expert in evaluating and ranking solution components to problems.\n"
            "\n"
            "Instructions:\n"
            "\n"
            '1. Analyze a problem and two solution components, labeled "Solution Component One"'
            ' and "Solution Component Two"\n'
            "2. Determine which is more important and practical.\n"
            "\n"
            "Important Instructions:\n"
            "\n"
            "1. {{interest_instruction}}\n"
            "\n"
            'Always output your decision as "One", "Two" or "Neither". No explanation is necessary.\n'
            "\n"
            "Think step by step."
        ),
        user=(
            "Problem:\n"
            "\n"
            "{{problem}}\n"
            "\n"
            "Solutions to assess:\n"
            "\n"
            "Solution Component One:\n"
            "\n"
            "{{component_one}}\n"
            "\n"
            "Top pro for solution component one:\n"
            "\n"
            "{{pro_one}}\n"
            "\n"
            "Top con for solution component one:\n"
            "\n"
            "{{con_one}}\n"
            "\n"
            "Solution Component Two:\n"
            "\n"
            "{{component_two}}\n"
            "\n"
            "Top pro for solution component two:\n"
            "\n"
            "{{pro_two}}\n"
            "\n"
            "Top con for solution component two:\n"
            "\n"
            "{{con_two}}\n"
            "\n"
            "The more important solution component is:"
        ),
    )
)

_register(
    PromptTemplate(
        name="pairwise_subproblem",
        owner="ranking",
        system=(
            "You're an expert in evaluating and ranking component problems of a larger challenge.\n"
            "\n"
            "Instructions:\n"
            "\n"
            '1. Analyze an overarching problem and two of its component problems, labeled'
            ' "Problem Component One" and "Problem Component Two"\n'
            "2. Determine which component problem is more important to address.\n"
            "\n"
            "Important Instructions:\n"
            "\n"
            "1. {{interest_instruction}}\n"
            "\n"
            'Always output your decision as "One", "Two" or "Neither". No explanation is necessary.\n'
            "\n"
            "Think step by step."
        ),
        user=(
            "Problem:\n"
            "\n"
            "{{problem}}\n"
            "\n"
            "Problem components to assess:\n"
            "\n"
            "Problem Component One:\n"
            "\n"
            "{{component_one}}\n"
            "\n"
            "Problem Component Two:\n"
            "\n"
            "{{component_two}}\n"
            "\n"
            "The more important problem component is:"
        ),
    )
)

# --------------------------------------------------------------------------
# research-owned templates

_register(
    PromptTemplate(
        name="query_generation",
        owner="research",
        system=(
            "You're an expert in web research and search engine use.\n"
            "\n"
            "Instructions:\n"
            "\n"
            "1. Read the research subject below.\n"
            "2. Create exactly the requested number of search queries in the requested"
            " category, written the way a skilled researcher would type them into a"
            " search engine.\n"
            "3. Queries in the scientific category should target academic sources;"
            " openData queries should target datasets and statistics; news queries"
            " should target current reporting; general queries have no restriction.\n"
            "\n"
            "Always output a JSON array of query strings and nothing else.\n"
            "\n"
            "Think step by step."
        ),
        user=(
            "Research subject:\n"
            "\n"
            "{{subject}}\n"
            "\n"
            "Create {{n}} search queries in the {{category}} category to find {{purpose}}."
        ),
    )
)

_register(
    PromptTemplate(
        name="query_pairwise",
        owner="research",
        system=(
            "You're an expert in evaluating and ranking search queries for a research goal.\n"
            "\n"
            "Instructions:\n"
            "\n"
            '1. Analyze a research goal and two search queries, labeled "Search Query One"'
            ' and "Search Query Two"\n'
            "2. Determine which query is more likely to surface relevant, high quality sources.\n"
            "\n"
            'Always output your decision as "One", "Two" or "Neither". No explanation is necessary.\n'
            "\n"
            "Think step by step."
        ),
        user=(
            "Research goal:\n"
            "\n"
            "{{goal}}\n"
            "\n"
            "Search Query One:\n"
            "\n"
            "{{component_one}}\n"
            "\n"
            "Search Query Two:\n"
            "\n"
            "{{component_two}}\n"
            "\n"
            "The more promising search query is:"
        ),
    )
)

_register(
    PromptTemplate(
        name="relevance",
        owner="research",
        system=(
            "You're an expert in judging whether a web page is useful for a research goal.\n"
            "\n"
            "Instructions:\n"
            "\n"
            "1. Read the research goal and the page excerpt.\n"
            "2. Rate how relevant the page is to the goal on a scale from 0 to 100.\n"
            "\n"
            "Always output a single integer between 0 and 100 and nothing else."
        ),
        user=(
            "Research goal:\n"
            "\n"
            "{{goal}}\n"
            "\n"
            "Page title: {{page_title}}\n"
            "\n"
            "Page excerpt:\n"
            "\n"
            "{{excerpt}}"
        ),
    )
)

_register(
    PromptTemplate(
        name="extract_subproblems",
        owner="research",
        system=(
            "You're an expert in problem analysis and decomposition.\n"
            "\n"
            "Instructions:\n"
            "\n"
            "1. Read the overarching problem statement and the web page text.\n"
            "2. Extract every distinct component problem the page describes that"
            " contributes to the overarching problem.\n"
            "3. For each component problem, identify the entities it affects and the"
            " negative effects on each entity, when the page states them.\n"
            "\n"
            "Always output a JSON array of objects in this format:\n"
            '[{ "title": string, "description": string, "affectedEntities":'
            ' [{ "name": string, "negativeEffects": [string] }] }]\n'
            "\n"
            "Do not introduce any new JSON properties.\n"
            "\n"
            "Think step by step."
        ),
        user=(
            "Problem statement:\n"
            "\n"
            "{{statement}}\n"
            "\n"
            "Web page ({{url}}):\n"
            "\n"
            "{{page_text}}"
        ),
    )
)

_register(
    PromptTemplate(
        name="extract_solutions",
        owner="research",
        system=(
            "You're an expert in identifying solution ideas in written sources.\n"
            "\n"
            "Instructions:\n"
            "\n"
            "1. Read the problem below and the web page text.\n"
            "2. Extract every distinct solution idea the page offers for this problem.\n"
            "3. Solutions should include only one core idea each.\n"
            "\n"
            "Always output a JSON array of objects in this format:\n"
            '[{ "title": string, "description": string, "mainBenefitOfSolution": string,'
            ' "mainObstacleToSolutionAdoption": string }]\n'
            "\n"
            "Do not introduce any new JSON properties.\n"
            "\n"
            "Think step by step."
        ),
        user=(
            "Problem:\n"
            "\n"
            "{{problem}}\n"
            "\n"
            "Web page ({{url}}):\n"
            "\n"
            "{{page_text}}"
        ),
    )
)

_register(
    PromptTemplate(
        name="extract_evidence",
        owner="research",
        system=(
            "You're an expert in gathering policy evidence from written sources.\n"
            "\n"
            "Instructions:\n"
            "\n"
            "1. Read the policy proposal and the web page text.\n"
            "2. Extract the passages that belong to the requested evidence category.\n"
            "3. Report nothing when the page has no material for the category.\n"
            "\n"
            "Always output a JSON array of objects in this format:\n"
            '[{ "summary": string, "bullets": [string] }]\n'
            "\n"
            "Do not introduce any new JSON properties.\n"
            "\n"
            "Think step by step."
        ),
        user=(
            "Policy proposal:\n"
            "\n"
            "{{policy}}\n"
            "\n"
            "Evidence category: {{category}}\n"
            "\n"
            "Web page ({{url}}):\n"
            "\n"
            "{{page_text}}"
        ),
    )
)

_register(
    PromptTemplate(
        name="viability",
        owner="research",
        system=(
            "You're an expert in assessing whether proposed solutions are viable.\n"
            "\n"
            "Instructions:\n"
            "\n"
            "1. Read the problem and the candidate solution.\n"
            "2. Judge whether the solution is concrete and implementable at all;"
            " viable does not mean perfect.\n"
            "\n"
            'Always output exactly "Yes" when the solution is viable or "No" when it'
            " is not. No explanation is necessary."
        ),
        user=(
            "Problem:\n"
            "\n"
            "{{problem}}\n"
            "\n"
            "Candidate solution:\n"
            "\n"
            "{{solution}}"
        ),
    )
)

# --------------------------------------------------------------------------
# evolution-owned templates

_MUTATION_IMPORTANT = (
    "Important Instructions (override the previous instructions if needed):\n"
    "\n"
    "1. Never create solutions in the form of frameworks or holistic approaches\n"
    "2. Solutions should include only one core idea.\n"
    "3. The solution title should indicate the benefits or results of implementing the solution.\n"
    "4. Remember that the main facilitator for implementation will be civil society"
    " working with governments.\n"
    "5. Frame solutions with the intention of convincing politicians and governments"
    " to put them into action.\n"
)

_SOLUTION_CONTEXT_USER = (
    "Problem Statement:\n"
    "\n"
    "{{statement}}\n"
    "\n"
    "Sub Problem:\n"
    "\n"
    "{{subproblem}}\n"
    "\n"
    "Top Affected Entities:\n"
    "\n"
    "{{entities}}\n"
    "\n"
)

_register(
    PromptTemplate(
        name="mutation",
        owner="evolution",
        system=(
            "As an AI expert specializing in genetic algorithms, your task is to mutate"
            " the following solution.\n"
            "\n"
            "Instructions:\n"
            "\n"
            "1. {{rate_instruction}}\n"
            "2. Mutation can involve introducing new attributes, modifying existing ones,"
            " or removing less important ones.\n"
            "3. Ensure the mutation is creative, meaningful, and continues to offer a"
            " viable solution to the presented problem.\n"
            '4. Avoid referring to your output as "the merged solution" or "the mutated'
            ' solution". Instead, present it as a standalone solution.\n'
            "\n"
            + _MUTATION_IMPORTANT
            + "\n"
            "Always format your mutated solution in the following JSON structure:\n"
            "\n"
            + SOLUTION_JSON_SCHEMA
            + "\n"
            "\n"
            "Do not introduce any new JSON properties.\n"
            "\n"
            "Think step by step."
        ),
        user=(
            _SOLUTION_CONTEXT_USER
            + "Solution to mutate:\n"
            "\n"
            "{{solution_json}}\n"
            "\n"
            "Generate and output JSON for the mutated solution below:"
        ),
    )
)

_register(
    PromptTemplate(
        name="crossover",
        owner="evolution",
        system=(
            "As an AI expert specializing in genetic algorithms, your task is to merge"
            " the two following solutions into a single new solution.\n"
            "\n"
            "Instructions:\n"
            "\n"
            "1. Combine the strongest attributes of both parent solutions into one new solution.\n"
            "2. Ensure the merged solution is coherent, meaningful, and continues to offer"
            " a viable solution to the presented problem.\n"
            '3. Avoid referring to your output as "the merged solution" or "the mutated'
            ' solution". Instead, present it as a standalone solution.\n'
            "\n"
            + _MUTATION_IMPORTANT
            + "\n"
            "Always format your merged solution in the following JSON structure:\n"
            "\n"
            + SOLUTION_JSON_SCHEMA
            + "\n"
            "\n"
            "Do not introduce any new JSON properties.\n"
            "\n"
            "Think step by step."
        ),
        user=(
            _SOLUTION_CONTEXT_USER
            + "Solution One:\n"
            "\n"
            "{{solution_one_json}}\n"
            "\n"
            "Solution Two:\n"
            "\n"
            "{{solution_two_json}}\n"
            "\n"
            "Generate and output JSON for the merged solution below:"
        ),
    )
)

_register(
    PromptTemplate(
        name="pros_cons",
        owner="evolution",
        system=(
            "You're an expert in critically analyzing solutions to problems.\n"
            "\n"
            "Instructions:\n"
            "\n"
            "1. Read the problem and the solution below.\n"
            "2. Produce exactly {{n_each}} pros and {{n_each}} cons for the solution,"
            " each a single self-contained sentence.\n"
            "\n"
            "Always output JSON in this format:\n"
            '{ "pros": [string], "cons": [string] }\n'
            "\n"
            "Do not introduce any new JSON properties.\n"
            "\n"
            "Think step by step."
        ),
        user=(
            "Problem:\n"
            "\n"
            "{{problem}}\n"
            "\n"
            "Solution to analyze:\n"
            "\n"
            "{{solution}}"
        ),
    )
)

_register(
    PromptTemplate(
        name="fresh_solutions",
        owner="evolution",
        system=(
            "You're an expert in generating creative solutions to problems.\n"
            "\n"
            "Instructions:\n"
            "\n"
            "1. Read the problem below.\n"
            "2. Generate exactly the requested number of new solution ideas that are"
            " distinct from the existing solutions listed.\n"
            "3. Solutions should include only one core idea each.\n"
            "\n"
            "Always output a JSON array of objects in this format:\n"
            '[{ "title": string, "description": string, "mainBenefitOfSolution": string,'
            ' "mainObstacleToSolutionAdoption": string }]\n'
            "\n"
            "Do not introduce any new JSON properties.\n"
            "\n"
            "Think step by step."
        ),
        user=(
            "Problem:\n"
            "\n"
            "{{problem}}\n"
            "\n"
            "Existing solution titles:\n"
            "\n"
            "{{existing_titles}}\n"
            "\n"
            "Generate {{n}} new solution ideas."
        ),
    )
)

# --------------------------------------------------------------------------
# policy-owned templates

_register(
    PromptTemplate(
        name="policy_from_solutions",
        owner="policy",
        system=(
            "You're an expert in turning solution ideas into concrete policy proposals.\n"
            "\n"
            "Instructions:\n"
            "\n"
            "1. Read the problem and the numbered solution ideas below.\n"
            "2. Draft exactly the requested number of policy proposals that a government"
            " body could adopt, each grounded in one or more of the solutions.\n"
            "3. For each proposal, list the numbers of the solutions it builds on.\n"
            "\n"
            "Always output a JSON array of objects in this format:\n"
            '[{ "title": string, "description": string, "basedOnSolutions": [number] }]\n'
            "\n"
            "Do not introduce any new JSON properties.\n"
            "\n"
            "Think step by step."
        ),
        user=(
            "Problem:\n"
            "\n"
            "{{problem}}\n"
            "\n"
            "Solutions:\n"
            "\n"
            "{{numbered_solutions}}\n"
            "\n"
            "Draft {{n}} policy proposals."
        ),
    )
)

# --------------------------------------------------------------------------
# rater-owned templates

# The judge's system instructions. Byte-for-byte stability here is load
# bearing: results are only comparable across runs if the judge prompt
# never drifts, and tests pin the exact text.
JUDGE_SYSTEM_PROMPT = (
    "1. You are an expert in analyzing how well a solution matches requirements\n"
    "2. Compare the key points in each requirement with the key points in the solution\n"
    "3. If solution does more than required then that is fine\n"
    "4. Always and only output the following JSON format:"
    " [{ requirementTitle, solutionCoversPercent }]"
)

_register(
    PromptTemplate(
        name="judge",
        owner="rater",
        system=JUDGE_SYSTEM_PROMPT,
        user=(
            "Requirement ({{requirement_title}}):\n"
            "\n"
            "{{requirement_text}}\n"
            "\n"
            "Solution:\n"
            "\n"
            "{{solution_text}}"
        ),
    )
)

# --------------------------------------------------------------------------
# orchestrator-owned templates

_register(
    PromptTemplate(
        name="compress",
        owner="orchestrator",
        system=(
            "You're an expert in compressing text.\n"
            "\n"
            "Instructions:\n"
            "\n"
            "1. Output the same text with as few words as possible while still keeping"
            " all detail, nuance and tone.\n"
            "2. Never add information that is not in the original text.\n"
            "\n"
            "Always output only the compressed text."
        ),
        user="Text to compress:\n\n{{text}}",
    )
)

_VALIDATOR_FORMAT = (
    '\nAlways answer with exactly "PASS" when the output is acceptable, or'
    ' "FAIL: " followed by one sentence naming the problem.'
)

_register(
    PromptTemplate(
        name="validate_correctness",
        owner="orchestrator",
        system=(
            "You're an expert reviewer checking a derived output against its source"
            " text for correctness.\n"
            "\n"
            "Instructions:\n"
            "\n"
            "1. Compare the candidate output with the source text.\n"
            "2. Fail the output if any fact in it contradicts the source.\n"
            + _VALIDATOR_FORMAT
        ),
        user=(
            "Source text:\n"
            "\n"
            "{{original}}\n"
            "\n"
            "Candidate output:\n"
            "\n"
            "{{candidate}}"
        ),
    )
)

_register(
    PromptTemplate(
        name="validate_completeness",
        owner="orchestrator",
        system=(
            "You're an expert reviewer checking a derived output against its source"
            " text for completeness.\n"
            "\n"
            "Instructions:\n"
            "\n"
            "1. Compare the candidate output with the source text.\n"
            "2. Fail the output if it drops any detail, nuance or tone present in the source.\n"
            + _VALIDATOR_FORMAT
        ),
        user=(
            "Source text:\n"
            "\n"
            "{{original}}\n"
            "\n"
            "Candidate output:\n"
            "\n"
            "{{candidate}}"
        ),
    )
)

_register(
    PromptTemplate(
        name="validate_hallucination",
        owner="orchestrator",
        system=(
            "You're an expert reviewer checking a derived output against its source"
            " text for hallucinations.\n"
            "\n"
            "Instructions:\n"
            "\n"
            "1. Compare the candidate output with the source text.\n"
            "2. Fail the output if it contains any information that does not appear in the source.\n"
            + _VALIDATOR_FORMAT
        ),
        user=(
            "Source text:\n"
            "\n"
            "{{original}}\n"
            "\n"
            "Candidate output:\n"
            "\n"
            "{{candidate}}"
        ),
    )
)


def policy_component_text(pol: Policy) -> str:
    return f"{pol.title}\n\n{pol.description}"
