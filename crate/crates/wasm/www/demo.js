import init, {
  Demo,
  grid_json,
  patch_rgba,
  patch_side,
  scene_rgba,
  scene_side,
} from "./pkg/pedk_wasm.js";

function blit(canvasId, rgba, side) {
  const canvas = document.getElementById(canvasId);
  canvas.width = side;
  canvas.height = side;
  const ctx = canvas.getContext("2d");
  const img = new ImageData(new Uint8ClampedArray(rgba), side, side);
  ctx.putImageData(img, 0, 0);
}

const $ = (id) => document.getElementById(id);

function drawScenePanel() {
  const seed = parseInt($("scene-seed").value, 10);
  $("scene-seed-val").textContent = seed;
  const positive = $("scene-positive").checked;
  blit("scene-canvas", scene_rgba(seed, positive), scene_side());
  for (let p = 0; p < 4; p++) {
    blit(`patch-canvas-${p}`, patch_rgba(seed, p), patch_side());
  }
}

function drawGridPanel() {
  const wr = parseInt($("grid-window").value, 10) / 100;
  const sr = parseInt($("grid-step").value, 10) / 100;
  $("grid-window-val").textContent = wr.toFixed(2);
  $("grid-step-val").textContent = sr.toFixed(2);

  const seed = parseInt($("scene-seed").value, 10);
  const side = scene_side();
  blit("grid-canvas", scene_rgba(seed, $("scene-positive").checked), side);

  const info = JSON.parse(grid_json(side, side, wr, sr));
  const el = $("grid-info");
  if (info.error) {
    el.textContent = info.error;
    return;
  }
  const ctx = $("grid-canvas").getContext("2d");
  ctx.strokeStyle = "rgba(95, 170, 255, 0.55)";
  ctx.lineWidth = 0.6;
  for (const [x, y, s] of info.rects) {
    ctx.strokeRect(x + 0.3, y + 0.3, s - 0.6, s - 0.6);
  }
  el.innerHTML =
    `window side ${info.side}px &middot; stride ${info.stride}px<br>` +
    `${info.count} windows &middot; up to ${info.max_coverage} windows per pixel`;
}

let demo = null;
let lastAnalysis = null;

function renderAnalysis() {
  if (!demo || !demo.is_trained()) return;
  const seed = parseInt($("analyze-seed").value, 10);
  $("analyze-seed-val").textContent = seed;
  const positive = $("analyze-positive").checked;

  blit("analyze-canvas", scene_rgba(seed, positive), scene_side());
  lastAnalysis = JSON.parse(demo.analyze(seed, positive));
  if (lastAnalysis.error) {
    $("verdict").textContent = lastAnalysis.error;
    return;
  }
  for (let p = 0; p < 4; p++) {
    blit(`hm-canvas-${p}`, demo.heatmap_rgba(p), scene_side());
  }
  renderVerdict();
}

function renderVerdict() {
  if (!demo || !lastAnalysis || lastAnalysis.error) return;
  const rule = parseInt($("vote-rule").value, 10);
  const theta = $("vote-theta").value;
  const verdict = JSON.parse(demo.decide(rule, theta));
  if (verdict.error) {
    $("verdict").textContent = verdict.error;
    return;
  }
  const tbody = $("train-table").querySelector("tbody");
  tbody.querySelectorAll("tr").forEach((row, i) => {
    const part = lastAnalysis.parts[i];
    row.cells[5].textContent =
      part.statistic.toFixed(1) + (part.uncertain ? " ?" : "");
    row.cells[6].textContent = verdict.decisions[i] ? "positive" : "negative";
  });
  const el = $("verdict");
  el.textContent = `final output: ${verdict.positive ? "OBJECT DETECTED" : "no object"}` +
    ` (${verdict.rule}, ${verdict.theta})`;
  el.className = "verdict " + (verdict.positive ? "pos" : "neg");
}

async function trainEnsemble() {
  const btn = $("train-btn");
  const status = $("train-status");
  btn.disabled = true;
  status.textContent = "training four part networks…";
  await new Promise((r) => setTimeout(r, 30)); // let the UI paint
  try {
    const n = parseInt($("train-n").value, 10);
    const epochs = parseInt($("train-epochs").value, 10);
    const report = JSON.parse(demo.train(n, epochs));
    if (report.error) {
      status.textContent = report.error;
      return;
    }
    const tbody = $("train-table").querySelector("tbody");
    tbody.innerHTML = "";
    for (const part of report.per_part) {
      const tr = document.createElement("tr");
      tr.innerHTML =
        `<td>${part.part}</td>` +
        `<td>${(100 * part.val_accuracy).toFixed(1)}%</td>` +
        `<td>${part.theta_p.toFixed(1)}</td>` +
        `<td>${part.theta_n.toFixed(1)}</td>` +
        `<td>${part.theta_i.toFixed(1)}</td>` +
        `<td>&mdash;</td><td>&mdash;</td>`;
      tbody.appendChild(tr);
    }
    $("train-result").style.display = "block";
    status.textContent = "trained; thresholds calibrated on 24 validation scenes";
    renderAnalysis();
  } finally {
    btn.disabled = false;
  }
}

async function main() {
  await init();
  demo = new Demo(1);

  drawScenePanel();
  drawGridPanel();

  $("scene-seed").addEventListener("input", () => {
    drawScenePanel();
    drawGridPanel();
  });
  $("scene-positive").addEventListener("change", () => {
    drawScenePanel();
    drawGridPanel();
  });
  $("grid-window").addEventListener("input", drawGridPanel);
  $("grid-step").addEventListener("input", drawGridPanel);

  $("train-n").addEventListener("input", () => {
    $("train-n-val").textContent = $("train-n").value;
  });
  $("train-epochs").addEventListener("input", () => {
    $("train-epochs-val").textContent = $("train-epochs").value;
  });
  $("train-btn").addEventListener("click", trainEnsemble);
  $("analyze-seed").addEventListener("change", renderAnalysis);
  $("analyze-positive").addEventListener("change", renderAnalysis);
  $("vote-rule").addEventListener("change", renderVerdict);
  $("vote-theta").addEventListener("change", renderVerdict);
}

main();
