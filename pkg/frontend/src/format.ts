/** Display formatting. Values always come from gateway payloads verbatim;
 * only their presentation happens here. */

/** Elo ratings render as integers with a dot thousands separator: 1172 -> "1.172". */
export function formatRating(rating: number): string {
  const whole = Math.round(rating);
  const sign = whole < 0 ? "-" : "";
  const digits = Math.abs(whole).toString();
  let grouped = "";
  for (let i = 0; i < digits.length; i++) {
    const fromEnd = digits.length - i;
    grouped += digits[i];
    if (fromEnd > 1 && (fromEnd - 1) % 3 === 0) grouped += ".";
  }
  return sign + grouped;
}

/** "3 of 12 pairs voted" style progress line. */
export function pairProgress(votesCast: number, totalPairs: number): string {
  return `${votesCast} of ${totalPairs} pairs voted`;
}
