/**
 * Display formatting only. API values pass through to the screen; nothing
 * financial is recomputed here (percent rendering of a ratio is
 * presentation, not computation).
 */

export function fmtMetric(value: number | null | undefined, digits = 4): string {
  if (value === null || value === undefined) return "n/a";
  return value.toFixed(digits);
}

export function fmtPct(value: number | null | undefined): string {
  if (value === null || value === undefined) return "n/a";
  const sign = value > 0 ? "+" : "";
  return `${sign}${(value * 100).toFixed(2)}%`;
}

export function fmtMoney(value: string | null | undefined): string {
  if (!value) return "n/a";
  const [whole, frac] = value.split(".");
  const grouped = whole.replace(/\B(?=(\d{3})+(?!\d))/g, ",");
  return frac ? `${grouped}.${frac.slice(0, 2)}` : grouped;
}

export function fmtConfidence(value: number): string {
  return value.toFixed(2);
}
