/**
 * Minimal deterministic SVG chart primitives: one fixed canvas, linear
 * scales, polylines, bars, reference lines, and axis ticks. No randomness,
 * no timestamps: identical inputs produce identical bytes.
 */

export const WIDTH = 760;
export const HEIGHT = 420;
export const MARGIN = { left: 64, right: 20, top: 36, bottom: 48 };

export interface Scale {
  (v: number): number;
  domain: [number, number];
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  const fn = ((v: number) => r0 + ((v - d0) / span) * (r1 - r0)) as Scale;
  fn.domain = domain;
  return fn;
}

export function extent(values: number[], pad = 0.05): [number, number] {
  if (values.length === 0) return [0, 1];
  let lo = Math.min(...values);
  let hi = Math.max(...values);
  if (lo === hi) {
    lo -= 1;
    hi += 1;
  }
  const p = (hi - lo) * pad;
  return [lo - p, hi + p];
}

function fmt(v: number): string {
  if (Math.abs(v) >= 10000) return v.toExponential(1);
  if (Number.isInteger(v)) return String(v);
  return v.toFixed(Math.abs(v) < 1 ? 3 : 1);
}

export class Chart {
  private parts: string[] = [];

  constructor(
    readonly title: string,
    readonly xLabel: string,
    readonly yLabel: string,
  ) {}

  get plotArea() {
    return {
      x0: MARGIN.left,
      x1: WIDTH - MARGIN.right,
      y0: HEIGHT - MARGIN.bottom,
      y1: MARGIN.top,
    };
  }

  axes(x: Scale, y: Scale, xTicks = 6, yTicks = 5): void {
    const a = this.plotArea;
    this.parts.push(
      `<line x1="${a.x0}" y1="${a.y0}" x2="${a.x1}" y2="${a.y0}" stroke="#333"/>`,
      `<line x1="${a.x0}" y1="${a.y0}" x2="${a.x0}" y2="${a.y1}" stroke="#333"/>`,
    );
    for (let i = 0; i <= xTicks; i++) {
      const v = x.domain[0] + ((x.domain[1] - x.domain[0]) * i) / xTicks;
      const px = x(v);
      this.parts.push(
        `<line x1="${px.toFixed(1)}" y1="${a.y0}" x2="${px.toFixed(1)}" y2="${a.y0 + 5}" stroke="#333"/>`,
        `<text x="${px.toFixed(1)}" y="${a.y0 + 20}" font-size="11" text-anchor="middle">${fmt(v)}</text>`,
      );
    }
    for (let i = 0; i <= yTicks; i++) {
      const v = y.domain[0] + ((y.domain[1] - y.domain[0]) * i) / yTicks;
      const py = y(v);
      this.parts.push(
        `<line x1="${a.x0 - 5}" y1="${py.toFixed(1)}" x2="${a.x0}" y2="${py.toFixed(1)}" stroke="#333"/>`,
        `<text x="${a.x0 - 8}" y="${(py + 4).toFixed(1)}" font-size="11" text-anchor="end">${fmt(v)}</text>`,
      );
    }
  }

  polyline(xs: number[], ys: number[], x: Scale, y: Scale, color: string): void {
    const pts = xs
      .map((v, i) => `${x(v).toFixed(1)},${y(ys[i]).toFixed(1)}`)
      .join(" ");
    this.parts.push(
      `<polyline points="${pts}" fill="none" stroke="${color}" stroke-width="1.8"/>`,
    );
  }

  dots(xs: number[], ys: number[], x: Scale, y: Scale, color: string, r = 3): void {
    for (let i = 0; i < xs.length; i++) {
      this.parts.push(
        `<circle cx="${x(xs[i]).toFixed(1)}" cy="${y(ys[i]).toFixed(1)}" r="${r}" fill="${color}"/>`,
      );
    }
  }

  bars(xs: number[], ys: number[], x: Scale, y: Scale, width: number, color: string): void {
    const a = this.plotArea;
    for (let i = 0; i < xs.length; i++) {
      const px = x(xs[i]) - width / 2;
      const py = y(ys[i]);
      this.parts.push(
        `<rect x="${px.toFixed(1)}" y="${py.toFixed(1)}" width="${width.toFixed(1)}" ` +
          `height="${(a.y0 - py).toFixed(1)}" fill="${color}"/>`,
      );
    }
  }

  hline(value: number, y: Scale, color: string, label: string): void {
    const a = this.plotArea;
    const py = y(value);
    this.parts.push(
      `<line x1="${a.x0}" y1="${py.toFixed(1)}" x2="${a.x1}" y2="${py.toFixed(1)}" ` +
        `stroke="${color}" stroke-dasharray="6,4" stroke-width="1.5"/>`,
      `<text x="${a.x1 - 4}" y="${(py - 6).toFixed(1)}" font-size="11" text-anchor="end" fill="${color}">${label}</text>`,
    );
  }

  legend(entries: Array<[string, string]>): void {
    let ty = MARGIN.top + 6;
    for (const [label, color] of entries) {
      this.parts.push(
        `<rect x="${WIDTH - 180}" y="${ty - 9}" width="12" height="12" fill="${color}"/>`,
        `<text x="${WIDTH - 162}" y="${ty + 2}" font-size="11">${label}</text>`,
      );
      ty += 18;
    }
  }

  note(text: string): void {
    this.parts.push(
      `<text x="${WIDTH / 2}" y="${HEIGHT / 2}" font-size="16" text-anchor="middle" fill="#888">${text}</text>`,
    );
  }

  render(): string {
    const a = this.plotArea;
    return [
      `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" font-family="sans-serif">`,
      `<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`,
      `<text x="${WIDTH / 2}" y="22" font-size="14" text-anchor="middle" font-weight="bold">${this.title}</text>`,
      `<text x="${(a.x0 + a.x1) / 2}" y="${HEIGHT - 10}" font-size="12" text-anchor="middle">${this.xLabel}</text>`,
      `<text x="16" y="${(a.y0 + a.y1) / 2}" font-size="12" text-anchor="middle" transform="rotate(-90 16 ${(a.y0 + a.y1) / 2})">${this.yLabel}</text>`,
      ...this.parts,
      "</svg>",
    ].join("\n");
  }
}
