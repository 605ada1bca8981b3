/** Exact money rendering: integer fen in, strings out, no floating point. */

export function fenToYuan(fen: number): string {
  if (!Number.isInteger(fen)) throw new Error("amounts are integer fen");
  const sign = fen < 0 ? "-" : "";
  const abs = Math.abs(fen);
  const yuan = Math.floor(abs / 100);
  const rest = abs % 100;
  return `${sign}${yuan.toLocaleString("en-US")}.${String(rest).padStart(2, "0")}`;
}

export function parseYuanToFen(text: string): number {
  const trimmed = text.trim();
  if (!/^\d+(\.\d{1,2})?$/.test(trimmed)) {
    throw new Error("amount must look like 1234 or 1234.56");
  }
  const [whole, frac = ""] = trimmed.split(".");
  return parseInt(whole, 10) * 100 + parseInt((frac + "00").slice(0, 2), 10);
}
