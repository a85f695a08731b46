/**
 * DOM wiring for the review UI.  All behavior lives in viewmodel.ts and
 * render.ts; this module only moves events into state transitions and
 * state back into innerHTML.
 */

import { ApiError, ServiceClient } from "./api.js";
import {
  renderBanner,
  renderFailed,
  renderReview,
  renderRevealed,
} from "./render.js";
import {
  buildFeedbackPayload,
  canSubmit,
  fromCreation,
  fromDocument,
  rowProblem,
  setCorrection,
  setVerdict,
  type ReviewState,
  type Verdict,
} from "./viewmodel.js";

const params = new URLSearchParams(window.location.search);
const client = new ServiceClient(params.get("api") ?? "");

let review: ReviewState | null = null;

const app = document.getElementById("app")!;
app.innerHTML = `
  <div id="banner-slot"></div>
  <section id="create-view">
    <h2>Start a review session</h2>
    <p>Paste a function specification: a signature, a docstring and at
    least one doctest.</p>
    <textarea id="spec-input" rows="12" spellcheck="false"
      placeholder="def f(x: int) -> int:&#10;    &quot;&quot;&quot;...&#10;&#10;    >>> f(1)&#10;    2&#10;    &quot;&quot;&quot;"></textarea>
    <div class="submit-bar">
      <button id="create-btn" type="button">Start session</button>
    </div>
  </section>
  <div id="review-slot"></div>
  <div id="result-slot"></div>
`;

const bannerSlot = document.getElementById("banner-slot")!;
const createView = document.getElementById("create-view")!;
const reviewSlot = document.getElementById("review-slot")!;
const resultSlot = document.getElementById("result-slot")!;

function showBanner(
  kind: "error" | "info",
  message: string,
  options: { reload?: boolean } = {},
): void {
  bannerSlot.innerHTML = renderBanner(kind, message, options);
}

function clearBanner(): void {
  bannerSlot.innerHTML = "";
}

function describeError(error: unknown): string {
  if (error instanceof ApiError) {
    return error.detail;
  }
  return error instanceof Error ? error.message : String(error);
}

function redrawReview(): void {
  reviewSlot.innerHTML = review === null ? "" : renderReview(review);
}

/** Re-validates corrections in place so typing never loses focus. */
function refreshValidity(): void {
  if (review === null) {
    return;
  }
  for (const row of review.rows) {
    const cell = reviewSlot.querySelector(
      `tr[data-index="${row.index}"] .correction-cell`,
    );
    if (cell === null) {
      continue;
    }
    const problem = row.verdict === "reject" ? rowProblem(row) : null;
    let note = cell.querySelector(".problem");
    if (problem === null) {
      note?.remove();
    } else {
      if (note === null) {
        note = document.createElement("span");
        note.className = "problem";
        cell.appendChild(note);
      }
      note.textContent = problem;
    }
  }
  const button = document.getElementById("submit-btn");
  if (button instanceof HTMLButtonElement) {
    button.disabled = !canSubmit(review);
  }
}

function rememberSession(sessionId: string): void {
  const next = new URLSearchParams(window.location.search);
  next.set("session", sessionId);
  window.history.replaceState(null, "", `?${next.toString()}`);
}

function showOutcome(state: ReviewState): void {
  reviewSlot.innerHTML = "";
  if (state.sessionState === "failed") {
    resultSlot.innerHTML = renderFailed("");
    return;
  }
  if (state.revealedCode !== null) {
    resultSlot.innerHTML = renderRevealed(state.revealedCode);
  }
}

async function createSession(): Promise<void> {
  const specInput = document.getElementById("spec-input") as HTMLTextAreaElement;
  const button = document.getElementById("create-btn") as HTMLButtonElement;
  const specText = specInput.value;
  if (specText.trim() === "") {
    showBanner("error", "paste a specification first");
    return;
  }
  clearBanner();
  button.disabled = true;
  button.textContent = "Starting…";
  try {
    const created = await client.createSession(specText);
    review = fromCreation(created, specText);
    rememberSession(created.session_id);
    createView.hidden = true;
    redrawReview();
  } catch (error) {
    showBanner("error", describeError(error));
  } finally {
    button.disabled = false;
    button.textContent = "Start session";
  }
}

async function loadSession(sessionId: string): Promise<void> {
  clearBanner();
  try {
    const doc = await client.getSession(sessionId);
    review = fromDocument(doc);
    createView.hidden = true;
    resultSlot.innerHTML = "";
    if (review.sessionState === "awaiting_feedback") {
      redrawReview();
      return;
    }
    reviewSlot.innerHTML = "";
    const result = await client.getResult(sessionId);
    if (result.state === "revealed" && result.code !== undefined) {
      resultSlot.innerHTML = renderRevealed(result.code, {
        provenance: result.provenance,
        attemptsUsed: result.attempts_used,
      });
    } else {
      resultSlot.innerHTML = renderFailed(result.failure_reason ?? "");
    }
  } catch (error) {
    showBanner("error", describeError(error));
  }
}

async function submitFeedback(): Promise<void> {
  if (review === null || !canSubmit(review)) {
    return;
  }
  clearBanner();
  const payload = buildFeedbackPayload(review);
  try {
    const response = await client.submitFeedback(review.sessionId, payload);
    review = {
      ...review,
      sessionState: response.status,
      revealedCode: response.revealed_code,
    };
    reviewSlot.innerHTML = "";
    if (response.status === "failed") {
      resultSlot.innerHTML = renderFailed(response.failure_reason);
    } else if (response.revealed_code !== null) {
      resultSlot.innerHTML = renderRevealed(response.revealed_code, {
        attemptsUsed: response.attempts_used,
      });
    }
  } catch (error) {
    if (error instanceof ApiError && error.status === 409) {
      showBanner(
        "error",
        "this session has moved on since the page loaded — reload to see its current state",
        { reload: true },
      );
      return;
    }
    showBanner("error", describeError(error));
  }
}

app.addEventListener("click", (event) => {
  const target = event.target;
  if (!(target instanceof HTMLElement)) {
    return;
  }
  if (target.id === "create-btn") {
    void createSession();
  } else if (target.id === "submit-btn") {
    void submitFeedback();
  } else if (target.id === "reload-btn" && review !== null) {
    void loadSession(review.sessionId);
  }
});

app.addEventListener("change", (event) => {
  const target = event.target;
  if (
    review !== null &&
    target instanceof HTMLInputElement &&
    target.type === "radio" &&
    target.dataset.index !== undefined
  ) {
    const index = Number(target.dataset.index);
    review = setVerdict(review, index, target.value as Verdict);
    redrawReview();
  }
});

app.addEventListener("input", (event) => {
  const target = event.target;
  if (
    review !== null &&
    target instanceof HTMLInputElement &&
    target.classList.contains("correction") &&
    target.dataset.index !== undefined
  ) {
    const index = Number(target.dataset.index);
    review = setCorrection(review, index, target.value);
    refreshValidity();
  }
});

const initialSession = params.get("session");
if (initialSession !== null) {
  void loadSession(initialSession);
}
