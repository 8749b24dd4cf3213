// Browser bootstrap: binds the controller to the three playground sections
// (pick data, launch/inspect the DAG, review results).

import { ApiClient } from "./api.js";
import { PlaygroundController } from "./state.js";
import {
  renderBanner,
  renderChart,
  renderDag,
  renderDataPicker,
  renderGateBadges,
  renderLeaderboardTable,
  renderLineage,
  renderNodeError,
  renderRunPanel,
} from "./render.js";

const apiBase =
  new URLSearchParams(window.location.search).get("api") ?? "http://127.0.0.1:8787";
const controller = new PlaygroundController(new ApiClient(apiBase));

const el = (id: string): HTMLElement => {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing element #${id}`);
  return found;
};

function repaint(): void {
  el("banner").innerHTML = renderBanner(controller.state);
  el("picker").innerHTML = renderDataPicker(
    controller.state.partitions,
    controller.state.selectedPartitions,
  );
  const pipeline = controller.state.currentPipeline;
  el("lineage").innerHTML = pipeline ? renderLineage(controller.state.lineage) : "";
  el("dag").innerHTML = pipeline
    ? renderDag(
        pipeline,
        controller.state.highlight,
        controller.state.runPanel?.failing_node ?? null,
      )
    : `<div class="empty">Select a pipeline version.</div>`;
  el("node-error").innerHTML = renderNodeError(controller.state);
  el("run-panel").innerHTML = controller.state.runPanel
    ? renderRunPanel(controller.state.runPanel)
    : "";
  el("leaderboard").innerHTML = renderLeaderboardTable(controller.state.leaderboard);
  el("gates").innerHTML = renderGateBadges(controller.state);
  el("chart").innerHTML = controller.state.chart ? renderChart(controller.state.chart) : "";
  fillPipelineSelect();
}

function fillPipelineSelect(): void {
  const select = el("pipeline-select") as HTMLSelectElement;
  const options = controller.state.pipelines
    .map((p) => `<option value="${p.name}@${p.version}">${p.name}@${p.version}</option>`)
    .join("");
  if (select.innerHTML !== options) select.innerHTML = options;
}

async function refresh(): Promise<void> {
  await controller.refreshCatalog();
  await controller.refreshLeaderboard().catch(() => undefined);
  repaint();
}

function wire(): void {
  el("refresh").addEventListener("click", () => void refresh());

  el("picker").addEventListener("click", (event) => {
    const row = (event.target as HTMLElement).closest("tr[data-partition]");
    if (row) {
      controller.togglePartition(row.getAttribute("data-partition")!);
      repaint();
    }
  });

  el("publish-form").addEventListener("submit", (event) => {
    event.preventDefault();
    const name = (el("dataset-name") as HTMLInputElement).value.trim();
    if (!name) return;
    void controller
      .publishSelection(name)
      .then(refresh)
      .catch((error) => window.alert(error.message));
  });

  el("open-pipeline").addEventListener("click", () => {
    const value = (el("pipeline-select") as HTMLSelectElement).value;
    if (!value) return;
    const [name, version] = value.split("@");
    void controller.openPipeline(name, version).then(repaint);
  });

  el("swap-form").addEventListener("submit", (event) => {
    event.preventDefault();
    const params = (el("swap-params") as HTMLInputElement).value || "{}";
    void controller
      .swapNode({
        nodeId: (el("swap-node") as HTMLInputElement).value.trim(),
        functionName: (el("swap-function") as HTMLInputElement).value.trim(),
        functionVersion: (el("swap-version") as HTMLInputElement).value.trim(),
        params: JSON.parse(params),
      })
      .then(refresh)
      .catch((error) => window.alert(error.message));
  });

  el("run-form").addEventListener("submit", (event) => {
    event.preventDefault();
    const parse = (value: string) => {
      const [name, version] = value.split("@");
      return { name, version };
    };
    void controller
      .launchRun(
        parse((el("train-ref") as HTMLInputElement).value.trim()),
        parse((el("eval-ref") as HTMLInputElement).value.trim()),
      )
      .then(refresh)
      .catch((error) => window.alert(error.message));
  });

  el("leaderboard").addEventListener("click", (event) => {
    const row = (event.target as HTMLElement).closest("tr[data-run]");
    if (row) {
      void controller.showRun(Number(row.getAttribute("data-run"))).then(repaint);
    }
  });
}

wire();
void refresh();
