/** Small DOM and SVG construction helpers; no framework, no dependencies. */

const SVG_NS = "http://www.w3.org/2000/svg";

export type Attrs = Record<string, string | number>;

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Attrs = {},
  children: (Node | string)[] = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  applyAttrs(node, attrs);
  for (const child of children) node.append(child);
  return node;
}

export function svgEl<K extends keyof SVGElementTagNameMap>(
  tag: K,
  attrs: Attrs = {},
  children: (Node | string)[] = [],
): SVGElementTagNameMap[K] {
  const node = document.createElementNS(SVG_NS, tag);
  applyAttrs(node, attrs);
  for (const child of children) node.append(child);
  return node;
}

function applyAttrs(node: Element, attrs: Attrs): void {
  for (const [name, value] of Object.entries(attrs)) {
    node.setAttribute(name, String(value));
  }
}

export function clear(node: Element): void {
  while (node.firstChild) node.removeChild(node.firstChild);
}

/** Fixed categorical palette keyed by state index, shared by every view. */
const PALETTE = [
  "#4269d0",
  "#efb118",
  "#ff725c",
  "#6cc5b0",
  "#3ca951",
  "#ff8ab7",
  "#a463f2",
  "#97bbf5",
  "#9c6b4e",
  "#9498a0",
  "#168aad",
  "#b5179e",
];

export function stateColor(state: number): string {
  return PALETTE[state % PALETTE.length];
}

/** White-to-blue ramp for probability cells in [0, 1]. */
export function probabilityShade(p: number): string {
  const clamped = Math.max(0, Math.min(1, p));
  const lightness = 97 - 55 * clamped;
  return `hsl(215, 65%, ${lightness}%)`;
}
