/** Explanation panel model: statistical summary, capped histogram, and the
 * ranked reason list with Fix/Approve targets parsed out of each reason. */
import type { Explanation } from "./api.js";

export const HISTOGRAM_CAP = 20;

export interface HistogramBar {
  label: string;
  probability: number;
}

/** What POST /acknowledge needs to act on one reason. */
export interface AckTarget {
  lens: string;
  var: string;
  args: unknown[];
  /** Suggested Fix values (the model's support), when the reason names any. */
  choices: unknown[];
}

export interface ReasonView {
  text: string;
  target: AckTarget | null; // null: reason is informational only
}

export interface PanelView {
  kind: string;
  deterministic: boolean;
  confidence: number | null;
  variance: number | null;
  ciLow: unknown;
  ciHigh: unknown;
  boundLow: unknown;
  boundHigh: unknown;
  nSamples: number;
  histogram: HistogramBar[];
  reasons: ReasonView[];
}

/** The service renders reasons in two fixed shapes; recover the lens
 * variable they talk about so Fix/Approve can address it. A reason that
 * matches neither shape gets no controls. */
export function parseReason(text: string): AckTarget | null {
  let m = text.match(
    /^lens '([^']+)' repaired the missing value of '([^']+)' on row (\S+) /,
  );
  if (m) {
    return { lens: m[1], var: m[2], args: [m[3]], choices: [] };
  }
  m = text.match(
    /^lens '([^']+)' matched target column '([^']+)' to source column '([^']+)' by name similarity$/,
  );
  if (m) {
    return { lens: m[1], var: m[2], args: [], choices: [m[3]] };
  }
  return null;
}

function cap(histogram: [unknown, number][]): HistogramBar[] {
  const bars = [...histogram]
    .sort((a, b) => b[1] - a[1])
    .map(([v, p]) => ({ label: String(v), probability: p }));
  if (bars.length <= HISTOGRAM_CAP) {
    return bars;
  }
  const kept = bars.slice(0, HISTOGRAM_CAP);
  const rest = bars
    .slice(HISTOGRAM_CAP)
    .reduce((acc, b) => acc + b.probability, 0);
  kept.push({ label: "other", probability: rest });
  return kept;
}

export function explanationPanel(x: Explanation): PanelView {
  return {
    kind: x.kind,
    deterministic: x.deterministic,
    confidence: x.confidence,
    variance: x.variance,
    ciLow: x.ci_low,
    ciHigh: x.ci_high,
    boundLow: x.bound_low,
    boundHigh: x.bound_high,
    nSamples: x.n_samples,
    histogram: cap(x.histogram as [unknown, number][]),
    reasons: x.reasons.map((text) => ({ text, target: parseReason(text) })),
  };
}
