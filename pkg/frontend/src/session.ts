// Session state machine for one participant.
//
// Flow: fetch-next -> show context + two options -> record the choice
// -> advance. Submissions that fail on the network are queued and
// retried before anything else is sent, so a flaky connection loses no
// judgments; duplicates (replays after a reload) are surfaced to the
// caller and the session moves on, because the server already holds
// that answer.

import { ApiClient, DuplicateSubmissionError } from "./api.js";
import { isDone, type Choice, type ChoiceSubmission, type StimulusView } from "./types.js";

export type SessionState =
  | { kind: "idle" }
  | { kind: "loading" }
  | { kind: "judging"; view: StimulusView }
  | { kind: "done"; answered: number; total: number }
  | { kind: "error"; message: string; retryable: boolean };

export interface SessionEvents {
  onState: (state: SessionState) => void;
  /** a replayed submission was rejected by the server */
  onDuplicate?: (itemId: string) => void;
}

export class JudgeSession {
  private state: SessionState = { kind: "idle" };
  private pending: ChoiceSubmission[] = [];
  private choices: ChoiceSubmission[] = [];

  constructor(
    private readonly api: ApiClient,
    private readonly participantId: string,
    private readonly events: SessionEvents,
  ) {}

  get currentState(): SessionState {
    return this.state;
  }

  /** Judgments recorded by this session object (for progress displays). */
  get recorded(): readonly ChoiceSubmission[] {
    return this.choices;
  }

  get pendingCount(): number {
    return this.pending.length;
  }

  private setState(state: SessionState) {
    this.state = state;
    this.events.onState(state);
  }

  /** Fetch the next unanswered item; resumes automatically after reload. */
  async start(): Promise<void> {
    await this.flushPending();
    this.setState({ kind: "loading" });
    try {
      const next = await this.api.fetchNext(this.participantId);
      if (isDone(next)) {
        this.setState({ kind: "done", answered: next.answered, total: next.total });
      } else {
        this.setState({ kind: "judging", view: next });
      }
    } catch (err) {
      this.setState({ kind: "error", message: String(err), retryable: true });
    }
  }

  /** Record the participant's choice for the item on screen. */
  async answer(selected: Choice): Promise<void> {
    if (this.state.kind !== "judging") {
      return;
    }
    const submission: ChoiceSubmission = {
      item_id: this.state.view.item_id,
      participant_id: this.participantId,
      selected,
    };
    try {
      await this.api.submit(submission);
      this.choices.push(submission);
    } catch (err) {
      if (err instanceof DuplicateSubmissionError) {
        this.events.onDuplicate?.(submission.item_id);
        // the server already has an answer for this item; advancing is safe
      } else {
        this.pending.push(submission);
        this.setState({
          kind: "error",
          message: `submission queued after failure: ${String(err)}`,
          retryable: true,
        });
        return;
      }
    }
    await this.start();
  }

  /** Retry queued submissions in order; stops at the first failure. */
  async flushPending(): Promise<void> {
    while (this.pending.length > 0) {
      const submission = this.pending[0]!;
      try {
        await this.api.submit(submission);
        this.choices.push(submission);
        this.pending.shift();
      } catch (err) {
        if (err instanceof DuplicateSubmissionError) {
          this.events.onDuplicate?.(submission.item_id);
          this.pending.shift();
          continue;
        }
        return; // still offline; keep the queue for the next attempt
      }
    }
  }
}

/** Keyboard mapping: left picks A, right picks B. */
export function choiceForKey(key: string): Choice | null {
  if (key === "ArrowLeft") return "A";
  if (key === "ArrowRight") return "B";
  return null;
}
