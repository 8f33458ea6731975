import init, { connection_counts, mask_pattern, DemoTrainer } from "./pkg/pcnet_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const palette = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

function show(out, fn) {
  try {
    out.classList.remove("err");
    out.textContent = fn() ?? "";
  } catch (e) {
    out.classList.add("err");
    out.textContent = String(e);
  }
}

function updateCounts() {
  show($("c-result"), () => {
    const hidden = Uint32Array.from($("c-hidden").value.split(",").map((s) => Number(s.trim())));
    const c = connection_counts(num("c-in"), hidden, num("c-out"), num("c-k"));
    const pct = (100 * c.ratio()).toFixed(1);
    return `${c.parallel_total.toLocaleString()} parameters vs ${c.single_total.toLocaleString()} for one circuit ` +
      `(${pct}%); hidden-to-hidden links ${c.parallel_hidden.toLocaleString()} vs ${c.single_hidden.toLocaleString()}`;
  });
}

function updateMasks() {
  const canvas = $("m-canvas");
  const ctx = canvas.getContext("2d");
  const k = num("m-k"), instances = 24, epochs = 6;
  show($("m-result"), () => {
    const bits = mask_pattern($("m-policy").value, k, num("m-p"), instances, epochs, 7);
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    const gap = 12;
    const cw = (canvas.width - gap * (epochs - 1)) / (epochs * k);
    const ch = canvas.height / instances;
    let kept = 0;
    for (let e = 0; e < epochs; e++) {
      for (let i = 0; i < instances; i++) {
        for (let c = 0; c < k; c++) {
          const on = bits[(e * instances + i) * k + c];
          kept += on;
          ctx.fillStyle = on ? "#333" : "#eee";
          ctx.fillRect(e * (k * cw + gap) + c * cw, i * ch, cw - 1, ch - 1);
        }
      }
    }
    return `mean kept circuits per sample: ${(kept / (epochs * instances)).toFixed(2)} of ${k}`;
  });
}

let trainer = null;
let running = false;

function resetTrainer() {
  running = false;
  $("t-start").textContent = "start";
  if (trainer) trainer.free();
  trainer = null;
  show($("t-result"), () => {
    trainer = new DemoTrainer($("t-data").value, num("t-classes"), num("t-k"), num("t-width"),
      $("t-policy").value, num("t-lr"), 3);
    drawSurface();
    drawCurve();
    return "ready";
  });
}

function extentOf(points) {
  let m = 0;
  for (const v of points) m = Math.max(m, Math.abs(v));
  return m * 1.1;
}

function drawSurface() {
  const canvas = $("t-surface");
  const ctx = canvas.getContext("2d");
  const points = trainer.points(), labels = trainer.labels();
  const extent = extentOf(points);
  const res = 64;
  const grid = trainer.surface(res, extent);
  const cell = canvas.width / res;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.globalAlpha = 0.3;
  for (let r = 0; r < res; r++) {
    for (let c = 0; c < res; c++) {
      ctx.fillStyle = palette[grid[r * res + c]];
      ctx.fillRect(c * cell, r * cell, cell + 0.5, cell + 0.5);
    }
  }
  ctx.globalAlpha = 1;
  const toPx = (v) => ((v + extent) / (2 * extent)) * canvas.width;
  for (let i = 0; i < labels.length; i++) {
    ctx.fillStyle = palette[labels[i]];
    ctx.beginPath();
    ctx.arc(toPx(points[2 * i]), canvas.height - toPx(points[2 * i + 1]), 2.5, 0, 2 * Math.PI);
    ctx.fill();
  }
}

function drawCurve() {
  const canvas = $("t-curve");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#ccc";
  ctx.strokeRect(30, 10, canvas.width - 40, canvas.height - 40);
  ctx.fillStyle = "#555";
  ctx.fillText("error %", 2, 10);
  const series = [[trainer.train_errors(), "#888"], [trainer.test_errors(), "#d62728"]];
  const n = Math.max(series[0][0].length, 2);
  for (const [ys, color] of series) {
    ctx.strokeStyle = color;
    ctx.beginPath();
    ys.forEach((y, i) => {
      const px = 30 + (i / (n - 1)) * (canvas.width - 40);
      const py = 10 + (1 - y / 100) * (canvas.height - 40);
      i === 0 ? ctx.moveTo(px, py) : ctx.lineTo(px, py);
    });
    ctx.stroke();
  }
}

function tick() {
  if (!running || !trainer) return;
  show($("t-result"), () => {
    const err = trainer.step(1);
    drawSurface();
    drawCurve();
    return `epoch ${trainer.epochs_done()}: test error ${err.toFixed(1)}%`;
  });
  if (trainer.epochs_done() >= 300) running = false;
  requestAnimationFrame(tick);
}

await init();
for (const id of ["c-in", "c-hidden", "c-out", "c-k"]) $(id).addEventListener("input", updateCounts);
for (const id of ["m-policy", "m-k", "m-p"]) $(id).addEventListener("input", updateMasks);
for (const id of ["t-data", "t-classes", "t-k", "t-width", "t-policy", "t-lr"]) $(id).addEventListener("change", resetTrainer);
$("t-start").addEventListener("click", () => {
  running = !running;
  $("t-start").textContent = running ? "pause" : "start";
  tick();
});
$("t-reset").addEventListener("click", resetTrainer);
updateCounts();
updateMasks();
resetTrainer();
