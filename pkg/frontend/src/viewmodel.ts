/**
 * Pure view state for the doctest review screen.  Everything here is plain
 * data and plain functions so the behavior is testable without a browser;
 * the DOM layer renders whatever these functions produce.
 */

import type {
  CreationResponse,
  FeedbackPayload,
  ProposedRow,
  SessionDocument,
  ShownOutcome,
  VerdictPayload,
} from "./api.js";
import { correctionProblem, parseCorrection } from "./literals.js";

export type Verdict = "accept" | "reject";

export interface DoctestRow {
  index: number;
  /** Rendered argument tuple, echoed back verbatim on submit. */
  input: string;
  /** Rendered doctest shown to the reviewer ("" when there is none). */
  doctestText: string;
  /** One-line summary of what the candidate did on this input. */
  outcomeLabel: string;
  /** Canonical value text when the outcome was a value, else null. */
  shownValueText: string | null;
  isGiven: boolean;
  verdict: Verdict;
  correctionText: string;
}

export interface ReviewState {
  sessionId: string;
  functionName: string;
  sessionState: string;
  rows: DoctestRow[];
  givenFailures: string[];
  revealedCode: string | null;
  specText: string;
}

export function outcomeLabel(outcome: ShownOutcome): string {
  switch (outcome.kind) {
    case "value":
      return outcome.value_text ?? "";
    case "exception": {
      const name = outcome.exception_name ?? "Exception";
      const message = outcome.exception_message ?? "";
      return message ? `${name}: ${message}` : name;
    }
    case "timeout":
      return "timed out";
    case "resource_exceeded":
      return "resource limit exceeded";
    default:
      return outcome.detail ?? "sandbox error";
  }
}

function rowFromProposed(row: ProposedRow): DoctestRow {
  return {
    index: row.index,
    input: row.input,
    doctestText: row.doctest ?? "",
    outcomeLabel: outcomeLabel(row.shown_outcome),
    shownValueText:
      row.shown_outcome.kind === "value"
        ? (row.shown_outcome.value_text ?? null)
        : null,
    isGiven: row.is_given,
    verdict: "accept",
    correctionText: "",
  };
}

export function functionNameFromSpec(specText: string): string {
  const match = /^\s*def\s+([A-Za-z_][A-Za-z0-9_]*)/m.exec(specText);
  return match ? match[1]! : "";
}

export function fromCreation(body: CreationResponse, specText = ""): ReviewState {
  return {
    sessionId: body.session_id,
    functionName: body.function_name,
    sessionState: body.state,
    rows: body.proposed_doctests.map(rowFromProposed),
    givenFailures: body.given_doctest_failures,
    revealedCode: null,
    specText,
  };
}

export function fromDocument(doc: SessionDocument): ReviewState {
  return {
    sessionId: doc.id,
    functionName: functionNameFromSpec(doc.spec_text),
    sessionState: doc.state,
    rows: doc.proposed_views.map(rowFromProposed),
    givenFailures: [],
    revealedCode: doc.revealed_code,
    specText: doc.spec_text,
  };
}

/** Given rows stay accepted; rejecting them is not a valid transition. */
export function setVerdict(
  state: ReviewState,
  index: number,
  verdict: Verdict,
): ReviewState {
  const rows = state.rows.map((row) => {
    if (row.index !== index) {
      return row;
    }
    if (row.isGiven && verdict === "reject") {
      return row;
    }
    return { ...row, verdict };
  });
  return { ...state, rows };
}

export function setCorrection(
  state: ReviewState,
  index: number,
  text: string,
): ReviewState {
  const rows = state.rows.map((row) =>
    row.index === index ? { ...row, correctionText: text } : row,
  );
  return { ...state, rows };
}

/**
 * Why this row cannot be submitted yet, or null when it is fine.  Accepted
 * rows never block; rejected rows need a correction that parses and that
 * actually differs from what the candidate already produced.
 */
export function rowProblem(row: DoctestRow): string | null {
  if (row.verdict === "accept") {
    return null;
  }
  if (row.correctionText.trim() === "") {
    return "a rejected doctest needs a correction";
  }
  const problem = correctionProblem(row.correctionText);
  if (problem !== null) {
    return problem;
  }
  const correction = parseCorrection(row.correctionText);
  if (correction.kind === "value" && correction.text === row.shownValueText) {
    return "the correction matches the shown output; accept it instead";
  }
  return null;
}

export function canSubmit(state: ReviewState): boolean {
  return (
    state.sessionState === "awaiting_feedback" &&
    state.rows.length > 0 &&
    state.rows.every((row) => rowProblem(row) === null)
  );
}

/**
 * Builds the verdict list the service expects: one entry per row in order,
 * inputs echoed back, corrections canonicalized.
 */
export function buildFeedbackPayload(state: ReviewState): FeedbackPayload {
  const verdicts: VerdictPayload[] = state.rows.map((row) => {
    const problem = rowProblem(row);
    if (problem !== null) {
      throw new Error(`row ${row.index}: ${problem}`);
    }
    if (row.verdict === "accept") {
      return { input: row.input, verdict: "accept" };
    }
    return {
      input: row.input,
      verdict: "reject",
      correction: parseCorrection(row.correctionText),
    };
  });
  return { verdicts };
}

/**
 * Pulls the doctest blocks out of a specification's docstring so they can
 * be shown read-only when the service proposed nothing to review.
 */
export function extractGivenDoctests(specText: string): string[] {
  const lines = specText.split("\n");
  const blocks: string[] = [];
  let current: string[] | null = null;
  for (const raw of lines) {
    const line = raw.trim();
    if (line.startsWith(">>>")) {
      if (current !== null) {
        blocks.push(current.join("\n"));
      }
      current = [line];
      continue;
    }
    if (current !== null) {
      if (line === "" || line.startsWith('"""') || line.startsWith("'''")) {
        blocks.push(current.join("\n"));
        current = null;
      } else {
        current.push(line);
      }
    }
  }
  if (current !== null) {
    blocks.push(current.join("\n"));
  }
  return blocks;
}
