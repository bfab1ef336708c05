/** Browser entry point: wires the console to a running shim service.
 *
 * Expects an #app element; the service base URL comes from the `?api=`
 * query parameter (default http://127.0.0.1:8000).
 */
import { ApiClient, FetchTransport } from "./api.js";
import { Console } from "./console.js";
import { renderConsoleHtml } from "./render.js";

function promptForFixValue(choices: unknown[]): unknown | undefined {
  // the model's support values are offered as suggestions; free-form
  // entry stays available
  const hint = choices.length ? ` (suggested: ${choices.join(", ")})` : "";
  const raw = window.prompt(`Fix with value${hint}:`, String(choices[0] ?? ""));
  if (raw === null) {
    return undefined;
  }
  const asNumber = Number(raw);
  return raw !== "" && !Number.isNaN(asNumber) ? asNumber : raw;
}

export function mount(root: HTMLElement, baseUrl: string): Console {
  const console_ = new Console(new ApiClient(new FetchTransport(baseUrl)));
  const input = document.createElement("textarea");
  input.placeholder = "SELECT ...";
  const run = document.createElement("button");
  run.textContent = "Run";
  const view = document.createElement("div");
  root.append(input, run, view);

  const redraw = () => {
    view.innerHTML = renderConsoleHtml(console_.getState());
  };

  run.addEventListener("click", async () => {
    await console_.runQuery(input.value);
    redraw();
  });

  view.addEventListener("click", async (ev) => {
    const el = ev.target as HTMLElement;
    if (el.matches("td.cell.uncertain")) {
      await console_.explainCell(
        Number(el.dataset.row),
        el.dataset.col as string,
      );
      redraw();
    } else if (el.matches("td.row-uncertain")) {
      await console_.explainRow(Number(el.dataset.row));
      redraw();
    } else if (el.matches("button[data-action]")) {
      const i = Number(el.dataset.reason);
      if (el.dataset.action === "approve") {
        await console_.approve(i);
      } else {
        const panel = console_.getState().panel;
        const choices = panel?.view.reasons[i]?.target?.choices ?? [];
        const value = promptForFixValue(choices);
        if (value === undefined) {
          return;
        }
        await console_.fix(i, value);
      }
      redraw();
    }
  });
  return console_;
}

if (typeof document !== "undefined") {
  const root = document.getElementById("app");
  if (root) {
    const api =
      new URLSearchParams(window.location.search).get("api") ??
      "http://127.0.0.1:8000";
    mount(root, api);
  }
}
