/** Frontier chart geometry: sampling the segment quadratics, pixel
 * mapping, click inversion and the tangent line of rate selections.
 *
 * Between critical points k and k+1 the curve is
 *   e(l) = (1-l) e0 + l e1,
 *   v(l) = (1-l)^2 v00 + 2 l (1-l) v01 + l^2 v11,  s = sqrt(v),
 * exactly the interpolation the service uses, so sampled points lie on
 * the true frontier.
 */

import type { CriticalPoint, FrontierPayload, Segment } from "./types.js";

export interface ChartPoint {
  s: number;
  e: number;
}

export const MIN_POINTS_PER_SEGMENT = 64;

export function segmentPoint(seg: Segment, l: number): ChartPoint {
  const e = (1 - l) * seg.e0 + l * seg.e1;
  const v = (1 - l) ** 2 * seg.v00 + 2 * l * (1 - l) * seg.v01 + l ** 2 * seg.v11;
  return { s: Math.sqrt(Math.max(v, 0)), e };
}

export function sampleFrontier(
  payload: FrontierPayload,
  perSegment: number = MIN_POINTS_PER_SEGMENT,
): ChartPoint[] {
  const n = Math.max(perSegment, MIN_POINTS_PER_SEGMENT);
  if (payload.segments.length === 0) {
    return payload.critical_points.map((cp) => ({ s: cp.s, e: cp.e }));
  }
  const pts: ChartPoint[] = [];
  for (const seg of payload.segments) {
    for (let i = 0; i < n; i++) {
      pts.push(segmentPoint(seg, i / (n - 1)));
    }
  }
  return pts;
}

export function criticalMarkers(payload: FrontierPayload): ChartPoint[] {
  return payload.critical_points.map((cp) => ({ s: cp.s, e: cp.e }));
}

export interface PixelMap {
  toX(s: number): number;
  toY(e: number): number;
  fromPixel(px: number, py: number): ChartPoint;
  width: number;
  height: number;
}

export function fitPixelMap(
  pts: ChartPoint[],
  width: number,
  height: number,
  pad: number = 36,
): PixelMap {
  let sMin = Math.min(...pts.map((p) => p.s));
  let sMax = Math.max(...pts.map((p) => p.s));
  let eMin = Math.min(...pts.map((p) => p.e));
  let eMax = Math.max(...pts.map((p) => p.e));
  if (sMax - sMin < 1e-12) {
    sMin -= 0.5;
    sMax += 0.5;
  }
  if (eMax - eMin < 1e-12) {
    eMin -= 0.5;
    eMax += 0.5;
  }
  // anchor the deviation axis at zero so tangent rays start on screen
  sMin = Math.min(sMin, 0);
  const sx = (width - 2 * pad) / (sMax - sMin);
  const sy = (height - 2 * pad) / (eMax - eMin);
  return {
    width,
    height,
    toX: (s) => pad + (s - sMin) * sx,
    toY: (e) => height - pad - (e - eMin) * sy,
    fromPixel: (px, py) => ({
      s: sMin + (px - pad) / sx,
      e: eMin + (height - pad - py) / sy,
    }),
  };
}

export function svgPath(pts: ChartPoint[], map: PixelMap): string {
  return pts
    .map((p, i) => `${i === 0 ? "M" : "L"}${map.toX(p.s).toFixed(2)},${map.toY(p.e).toFixed(2)}`)
    .join(" ");
}

/** Left click copies the expected-return coordinate, right click the
 * standard-deviation coordinate, as in the desktop manual. */
export function clickValue(
  map: PixelMap,
  px: number,
  py: number,
  button: "left" | "right",
): { field: "e" | "s"; value: number } {
  const data = map.fromPixel(px, py);
  return button === "left" ? { field: "e", value: data.e } : { field: "s", value: data.s };
}

/** Tangent line of a rate selection: from (0, r) through the tangency
 * point, extended across the chart. */
export function tangentLine(
  sel: { e: number; s: number },
  rate: number,
  sMax: number,
): [ChartPoint, ChartPoint] | null {
  if (sel.s <= 0) return null;
  const slope = (sel.e - rate) / sel.s;
  return [
    { s: 0, e: rate },
    { s: sMax, e: rate + slope * sMax },
  ];
}

export function nearestCritical(
  payload: FrontierPayload,
  pt: ChartPoint,
): CriticalPoint | null {
  let best: CriticalPoint | null = null;
  let bestDist = Infinity;
  for (const cp of payload.critical_points) {
    const d = (cp.s - pt.s) ** 2 + (cp.e - pt.e) ** 2;
    if (d < bestDist) {
      bestDist = d;
      best = cp;
    }
  }
  return best;
}
