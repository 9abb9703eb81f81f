import type { ResultView } from "./types.js";

/** Rank movement badges for compare mode, keyed by quotation id.
 *  "▲2" rose two places since the pinned set, "▼1" fell one, "=" held
 *  its rank, and "new" was not in the pinned set at all. */
export function rankMovements(
  pinned: ResultView[],
  current: ResultView[],
): Map<string, string> {
  const before = new Map(pinned.map((r) => [r.quotation.id, r.rank]));
  const out = new Map<string, string>();
  for (const result of current) {
    const id = result.quotation.id;
    const prev = before.get(id);
    if (prev === undefined) {
      out.set(id, "new");
    } else if (prev > result.rank) {
      out.set(id, `▲${prev - result.rank}`);
    } else if (prev < result.rank) {
      out.set(id, `▼${result.rank - prev}`);
    } else {
      out.set(id, "=");
    }
  }
  return out;
}
