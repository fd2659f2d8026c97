/** Tiny DOM construction helpers — the whole UI is plain elements rebuilt
 * from fresh gateway payloads, so a create-and-replace helper is all the
 * "framework" needed. */

export type Child = Node | string | null | undefined | Child[];

export interface Attrs {
  class?: string;
  text?: string;
  title?: string;
  href?: string;
  type?: string;
  value?: string;
  placeholder?: string;
  disabled?: boolean;
  dataset?: Record<string, string>;
  onClick?: (event: MouseEvent) => void;
}

export function h(tag: string, attrs: Attrs = {}, ...children: Child[]): HTMLElement {
  const el = document.createElement(tag);
  if (attrs.class) el.className = attrs.class;
  if (attrs.text !== undefined) el.textContent = attrs.text;
  if (attrs.title !== undefined) el.title = attrs.title;
  if (attrs.href !== undefined) (el as HTMLAnchorElement).href = attrs.href;
  if (attrs.type !== undefined) (el as HTMLInputElement).type = attrs.type;
  if (attrs.value !== undefined) (el as HTMLInputElement).value = attrs.value;
  if (attrs.placeholder !== undefined) (el as HTMLInputElement).placeholder = attrs.placeholder;
  if (attrs.disabled !== undefined) (el as HTMLButtonElement).disabled = attrs.disabled;
  if (attrs.dataset) for (const [k, v] of Object.entries(attrs.dataset)) el.dataset[k] = v;
  if (attrs.onClick) el.addEventListener("click", attrs.onClick);
  appendChildren(el, children);
  return el;
}

function appendChildren(el: Element, children: Child[]): void {
  for (const child of children) {
    if (child === null || child === undefined) continue;
    if (Array.isArray(child)) appendChildren(el, child);
    else el.append(child);
  }
}

/** Replace an element's children with fresh ones. */
export function swap(el: Element, ...children: Child[]): void {
  el.replaceChildren();
  appendChildren(el, children);
}
