// Browser bootstrap: participant entry, keyboard handling, and the
// results dashboard toggle. All study state lives server-side; this
// file only wires DOM events to the session machine.

import { ApiClient } from "./api.js";
import { renderDashboard } from "./dashboard.js";
import { renderState } from "./render.js";
import { JudgeSession, choiceForKey } from "./session.js";

const api = new ApiClient("");
let session: JudgeSession | null = null;

const stage = document.getElementById("stage")!;
const form = document.getElementById("participant-form") as HTMLFormElement;
const input = document.getElementById("participant-id") as HTMLInputElement;
const notice = document.getElementById("notice")!;
const resultsButton = document.getElementById("show-results")!;

function draw() {
  if (!session) return;
  stage.innerHTML = renderState(session.currentState);
  for (const button of stage.querySelectorAll<HTMLButtonElement>("button.option")) {
    button.addEventListener("click", () => {
      void session?.answer(button.dataset.choice === "A" ? "A" : "B");
    });
  }
  stage.querySelector("#retry")?.addEventListener("click", () => void session?.start());
}

form.addEventListener("submit", (event) => {
  event.preventDefault();
  const participant = input.value.trim();
  if (!participant) return;
  session = new JudgeSession(api, participant, {
    onState: () => draw(),
    onDuplicate: (itemId) => {
      notice.textContent = `Item ${itemId} was already answered; moving on.`;
      setTimeout(() => (notice.textContent = ""), 4000);
    },
  });
  form.classList.add("hidden");
  void session.start();
});

document.addEventListener("keydown", (event) => {
  const choice = choiceForKey(event.key);
  if (choice && session?.currentState.kind === "judging") {
    void session.answer(choice);
  }
});

resultsButton.addEventListener("click", async () => {
  try {
    stage.innerHTML = renderDashboard(await api.fetchResults());
  } catch (err) {
    stage.innerHTML = `<p class="error">${String(err)}</p>`;
  }
});
