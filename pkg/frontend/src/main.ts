/** Entry point: read the project id from the URL and mount the app.
 *
 * The gateway serves exactly one project and has no listing endpoint, so the
 * id travels in the query string (?project=proj-demo) — which also keeps the
 * page stateless: the URL is the whole session.
 */

import { Gateway } from "./api.js";
import { App } from "./app.js";
import { h, swap } from "./dom.js";

function mountProjectForm(root: HTMLElement): void {
  const input = h("input", {
    type: "text",
    placeholder: "project id, e.g. proj-demo",
  }) as HTMLInputElement;
  const go = (): void => {
    const id = input.value.trim();
    if (id) window.location.search = `?project=${encodeURIComponent(id)}`;
  };
  input.addEventListener("keydown", (e) => {
    if (e.key === "Enter") go();
  });
  swap(
    root,
    h("form", { class: "project-form", onClick: (e) => e.preventDefault() },
      input,
      h("button", { text: "Open project", type: "button", onClick: go })),
  );
}

async function boot(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) return;
  const projectId = new URLSearchParams(window.location.search).get("project");
  if (!projectId) {
    mountProjectForm(root);
    return;
  }
  const app = new App(new Gateway(window.location.origin, projectId));
  swap(root, app.element);
  try {
    await app.start();
  } catch (err) {
    swap(
      root,
      h("p", {
        class: "load-error",
        text: `Could not load ${projectId}: ${err instanceof Error ? err.message : String(err)}`,
      }),
    );
  }
}

void boot();
