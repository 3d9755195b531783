// Wire types for the judgment service API.
//
// Deliberately blind: nothing here carries (or may ever carry) which of
// the two options is the original corpus sentence. De-blinding happens
// server-side only.

/** One item as presented to a participant. */
export interface StimulusView {
  item_id: string;
  context_text: string;
  option_a_text: string;
  option_b_text: string;
  /** items this participant has already answered */
  answered: number;
  total: number;
}

/** Returned by /api/stimuli/next once every item is answered. */
export interface SessionDone {
  done: true;
  answered: number;
  total: number;
}

export type NextResponse = StimulusView | SessionDone;

export function isDone(r: NextResponse): r is SessionDone {
  return (r as SessionDone).done === true;
}

export type Choice = "A" | "B";

/** POST body for /api/judgments. */
export interface ChoiceSubmission {
  item_id: string;
  participant_id: string;
  selected: Choice;
}

/** One aggregate row of the results table. */
export interface ResultsRow {
  items: number;
  agreement_pct?: number;
  model_corpus_pct?: number;
  model_human_pct?: number;
}

export interface ResultsTable {
  per_construction: Record<string, ResultsRow>;
  total: ResultsRow;
  pearson?: { vs_human: number | null; vs_corpus: number | null };
  items: Array<{
    item_id: string;
    construction_tag: string;
    judgments: number;
    reference_votes: number;
    human_label: 0 | 1;
  }>;
}
