// Expects the wasm-bindgen "web" target output in ./pkg (see README).
import init, { ParticleDemo, kernelFields, limitEndpoints } from "./pkg/catalytic_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function report(where, err) {
  $(where).innerHTML = `<span class="err">${err}</span>`;
}

// Draw a side x side row-major field, origin at the center.
function heatmap(canvas, values, side, rgb) {
  const ctx = canvas.getContext("2d");
  const img = ctx.createImageData(side, side);
  let max = 0;
  for (const v of values) max = Math.max(max, v);
  for (let i = 0; i < side * side; i++) {
    const a = max > 0 ? values[i] / max : 0;
    img.data.set([255 - a * (255 - rgb[0]), 255 - a * (255 - rgb[1]), 255 - a * (255 - rgb[2]), 255], 4 * i);
  }
  const off = new OffscreenCanvas(side, side);
  off.getContext("2d").putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
}

let demo = null;
let running = false;

function resetDemo() {
  try {
    demo?.free();
    demo = new ParticleDemo(num("pd-n"), num("pd-gamma"), num("pd-t1"), num("pd-t2"), num("pd-seed") >>> 0);
    drawDemo();
  } catch (e) {
    demo = null;
    report("pd-info", e);
  }
}

function drawDemo() {
  const side = demo.side();
  heatmap($("pd-xi"), demo.xiField(), side, [200, 30, 30]);
  heatmap($("pd-eta"), demo.etaField(), side, [30, 60, 200]);
  const [xi, eta] = demo.totals();
  $("pd-info").textContent =
    `t = ${demo.time().toFixed(2)}  events = ${demo.events()}  total xi = ${xi}  total eta = ${eta}`;
}

function tick() {
  if (!running || !demo) return;
  demo.advance(0.05, 200000);
  drawDemo();
  const [xi, eta] = demo.totals();
  if (xi === 0 && eta === 0) {
    toggleRun();
    return;
  }
  requestAnimationFrame(tick);
}

function toggleRun() {
  running = !running;
  $("pd-run").textContent = running ? "pause" : "run";
  if (running) requestAnimationFrame(tick);
}

function computeKernels() {
  try {
    const n = num("k-n");
    const side = 2 * n + 1;
    const out = kernelFields(n, num("k-kappa"), num("k-t"));
    const p = out.subarray(0, side * side);
    const g = out.subarray(side * side);
    heatmap($("k-p"), p, side, [20, 120, 60]);
    heatmap($("k-g"), g, side, [120, 60, 160]);
    const center = n * side + n;
    $("k-info").textContent =
      `p_t(0) = ${p[center].toExponential(4)}  g_t(0) = ${g[center].toFixed(5)}  sum p_t = ${p.reduce((a, b) => a + b, 0).toFixed(12)}`;
  } catch (e) {
    report("k-info", e);
  }
}

function sampleLimit() {
  try {
    const pts = limitEndpoints(num("l-x"), num("l-y"), num("l-g"), num("l-t"), num("l-p"), 7);
    const canvas = $("l-plot");
    const ctx = canvas.getContext("2d");
    let max = 0;
    for (const v of pts) max = Math.max(max, v);
    max = max || 1;
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    ctx.strokeStyle = "#999";
    ctx.strokeRect(0.5, 0.5, canvas.width - 1, canvas.height - 1);
    ctx.fillStyle = "rgba(40, 40, 160, 0.35)";
    let sx = 0;
    let sy = 0;
    for (let i = 0; i < pts.length; i += 2) {
      sx += pts[i];
      sy += pts[i + 1];
      const px = (pts[i] / max) * (canvas.width - 6) + 3;
      const py = canvas.height - 3 - (pts[i + 1] / max) * (canvas.height - 6);
      ctx.fillRect(px - 1, py - 1, 2, 2);
    }
    const m = pts.length / 2;
    $("l-info").textContent = `mean x = ${(sx / m).toFixed(4)}  mean y = ${(sy / m).toFixed(4)}  axes 0..${max.toFixed(2)}`;
  } catch (e) {
    report("l-info", e);
  }
}

await init();
$("status").textContent = "Ready.";
$("pd-reset").onclick = resetDemo;
$("pd-run").onclick = toggleRun;
$("k-go").onclick = computeKernels;
$("l-go").onclick = sampleLimit;
resetDemo();
computeKernels();
sampleLimit();
