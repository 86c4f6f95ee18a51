/** Wire types of the portfolio service JSON API. */

export type SelectBy = "eta" | "e" | "s" | "r";

export interface Segment {
  k: number;
  eta0: number;
  eta1: number;
  e0: number;
  e1: number;
  v00: number;
  v01: number;
  v11: number;
}

export interface CriticalPoint {
  eta: number;
  e: number;
  v: number;
  s: number;
  composition: Record<string, number>;
}

export interface FrontierPayload {
  segments: Segment[];
  critical_points: CriticalPoint[];
  open_ended: boolean;
}

export interface Selection {
  eta: number;
  e: number;
  v: number;
  s: number;
  r: number | null;
  k: number;
  l: number;
  status: string;
  glyph: string;
  composition: Record<string, number>;
}

export interface SelectRequest {
  by: SelectBy;
  value: number;
}
