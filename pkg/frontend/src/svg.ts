/**
 * Minimal SVG assembly: element builder plus a linear scale with ticks.
 *
 * Output must be deterministic byte-for-byte, so numbers are formatted
 * through one fixed-precision helper and attributes are emitted in the
 * order the caller supplies them.
 */

export type Attrs = Record<string, string | number>;

function escapeAttr(value: string): string {
  return value
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

function escapeText(value: string): string {
  return value.replaceAll("&", "&amp;").replaceAll("<", "&lt;").replaceAll(">", "&gt;");
}

/** Fixed-precision coordinate formatting; trims trailing zeros. */
export function fmt(value: number): string {
  if (Number.isInteger(value)) return String(value);
  return String(Number(value.toFixed(3)));
}

/** Build one element; children are pre-rendered markup strings. */
export function el(tag: string, attrs: Attrs, ...children: string[]): string {
  const parts = Object.entries(attrs).map(([key, value]) => {
    const text = typeof value === "number" ? fmt(value) : escapeAttr(value);
    return `${key}="${text}"`;
  });
  const open = parts.length > 0 ? `<${tag} ${parts.join(" ")}>` : `<${tag}>`;
  if (children.length === 0) return open.replace(/>$/, "/>");
  return `${open}${children.join("")}</${tag}>`;
}

/** Escaped text node content. */
export function textNode(value: string): string {
  return escapeText(value);
}

export interface Scale {
  (value: number): number;
  domain: [number, number];
  range: [number, number];
  ticks(count: number): number[];
}

/** Affine map from data domain to pixel range; degenerate domains widen by 1. */
export function linearScale(domain: [number, number], range: [number, number]): Scale {
  let [d0, d1] = domain;
  if (d0 === d1) {
    d0 -= 0.5;
    d1 += 0.5;
  }
  const [r0, r1] = range;
  const k = (r1 - r0) / (d1 - d0);
  const scale = ((value: number) => r0 + (value - d0) * k) as Scale;
  scale.domain = [d0, d1];
  scale.range = [r0, r1];
  scale.ticks = (count: number) => {
    const span = d1 - d0;
    const step = niceStep(span / Math.max(1, count));
    const start = Math.ceil(d0 / step) * step;
    const ticks: number[] = [];
    for (let v = start; v <= d1 + step * 1e-9; v += step) {
      ticks.push(Number(v.toFixed(9)));
    }
    return ticks;
  };
  return scale;
}

/** Round a raw step to the nearest 1/2/5 decade. */
function niceStep(raw: number): number {
  const power = Math.floor(Math.log10(raw));
  const base = Math.pow(10, power);
  const unit = raw / base;
  if (unit <= 1) return base;
  if (unit <= 2) return 2 * base;
  if (unit <= 5) return 5 * base;
  return 10 * base;
}
