/**
 * Small SVG assembly helpers shared by the two figure kinds.
 *
 * Figures are plain generated markup: every element is emitted as a
 * string and concatenated, which keeps output byte-reproducible.
 */

export interface Margins {
  top: number;
  right: number;
  bottom: number;
  left: number;
}

export function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Fixed short float formatting so output never depends on locale. */
export function fmt(v: number): string {
  if (!Number.isFinite(v)) throw new Error(`non-finite coordinate ${v}`);
  return Number(v.toFixed(3)).toString();
}

export function svgDocument(
  width: number,
  height: number,
  body: string[],
): string {
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}" font-family="Helvetica, Arial, sans-serif">`,
    `<rect width="${width}" height="${height}" fill="white"/>`,
    ...body,
    "</svg>",
    "",
  ].join("\n");
}

export function text(
  x: number,
  y: number,
  content: string,
  attrs = "",
): string {
  return `<text x="${fmt(x)}" y="${fmt(y)}" ${attrs}>${escapeXml(content)}</text>`;
}

/** Polyline through data points already mapped to pixel coordinates. */
export function path(
  pts: Array<[number, number]>,
  stroke: string,
  extra = "",
): string {
  if (pts.length === 0) throw new Error("cannot draw an empty path");
  const d = pts
    .map(([x, y], i) => `${i === 0 ? "M" : "L"}${fmt(x)} ${fmt(y)}`)
    .join("");
  return `<path d="${d}" fill="none" stroke="${stroke}" ${extra}/>`;
}

export interface Tick {
  /** Pixel position along the axis. */
  pos: number;
  label: string;
}

export function xAxis(
  y: number,
  x0: number,
  x1: number,
  ticks: Tick[],
  title: string,
): string {
  const parts = [
    `<line x1="${fmt(x0)}" y1="${fmt(y)}" x2="${fmt(x1)}" y2="${fmt(y)}" stroke="black"/>`,
  ];
  for (const tk of ticks) {
    parts.push(
      `<line x1="${fmt(tk.pos)}" y1="${fmt(y)}" x2="${fmt(tk.pos)}" y2="${fmt(y + 5)}" stroke="black"/>`,
      text(tk.pos, y + 18, tk.label, 'text-anchor="middle" font-size="11"'),
    );
  }
  parts.push(
    text((x0 + x1) / 2, y + 34, title, 'text-anchor="middle" font-size="12"'),
  );
  return parts.join("\n");
}

export function yAxis(
  x: number,
  y0: number,
  y1: number,
  ticks: Tick[],
  title: string,
): string {
  const parts = [
    `<line x1="${fmt(x)}" y1="${fmt(y0)}" x2="${fmt(x)}" y2="${fmt(y1)}" stroke="black"/>`,
  ];
  for (const tk of ticks) {
    parts.push(
      `<line x1="${fmt(x - 5)}" y1="${fmt(tk.pos)}" x2="${fmt(x)}" y2="${fmt(tk.pos)}" stroke="black"/>`,
      text(x - 8, tk.pos + 4, tk.label, 'text-anchor="end" font-size="11"'),
    );
  }
  parts.push(
    `<text x="${fmt(x - 42)}" y="${fmt((y0 + y1) / 2)}" text-anchor="middle" font-size="12" transform="rotate(-90 ${fmt(x - 42)} ${fmt((y0 + y1) / 2)})">${escapeXml(title)}</text>`,
  );
  return parts.join("\n");
}

/** Require a `.svg` output path; the renderer emits vector markup only. */
export function requireSvgPath(outputPath: string): void {
  if (!outputPath.toLowerCase().endsWith(".svg")) {
    throw new Error(
      `unsupported output extension for '${outputPath}': this renderer writes SVG, use a .svg path`,
    );
  }
}
