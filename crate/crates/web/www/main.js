import init, { Scene, tukey_weights } from "./pkg/vgmap_web.js";

const MIN_OVERLAP = 0.025;
const $ = (id) => document.getElementById(id);
const num = (id) => parseFloat($(id).value);

function axes(ctx, w, h) {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.moveTo(40, 10);
  ctx.lineTo(40, h - 30);
  ctx.lineTo(w - 10, h - 30);
  ctx.stroke();
}

function plotLine(canvas, ys, yMax, color, xLabel) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  axes(ctx, w, h);
  ctx.fillStyle = "#444";
  ctx.font = "12px sans-serif";
  ctx.fillText(xLabel, w / 2 - 30, h - 8);
  ctx.fillText(yMax.toPrecision(3), 2, 16);
  ctx.fillText("0", 26, h - 30);
  ctx.strokeStyle = color;
  ctx.lineWidth = 2;
  ctx.beginPath();
  ys.forEach((y, k) => {
    const px = 40 + ((w - 50) * k) / Math.max(ys.length - 1, 1);
    const py = h - 30 - ((h - 40) * y) / yMax;
    k ? ctx.lineTo(px, py) : ctx.moveTo(px, py);
  });
  ctx.stroke();
}

function drawTukey() {
  const width = num("tk-width");
  const offset = num("tk-offset");
  $("tk-width-v").value = width.toFixed(2);
  $("tk-offset-v").value = offset.toFixed(2);
  plotLine($("tk-canvas"), Array.from(tukey_weights(width, offset, 6, 300)), 1, "#1f6fd1", "‖e‖ from 0 to 6");
}

function drawCloud(ctx, xy, color, view) {
  ctx.fillStyle = color;
  for (let i = 0; i < xy.length; i += 2) {
    const px = view.cx + (xy[i] - view.x0) * view.scale;
    const py = view.cy - (xy[i + 1] - view.y0) * view.scale;
    ctx.fillRect(px, py, 1.6, 1.6);
  }
}

let scene = null;
let targetXY = null;

function rebuildScene() {
  scene?.free();
  scene = new Scene(3, num("ov-res"));
  targetXY = scene.target_xy();
  drawOverlap();
}

function drawOverlap(registered) {
  const [dx, dy, yaw] = [num("ov-dx"), num("ov-dy"), num("ov-yaw")];
  $("ov-dx-v").value = dx.toFixed(1);
  $("ov-dy-v").value = dy.toFixed(1);
  $("ov-yaw-v").value = yaw.toFixed(1);
  const rate = scene.overlap(dx, dy, yaw);
  $("ov-rate").value = `${(100 * rate).toFixed(1)} % of source points in ${scene.voxels()} voxels`;
  $("ov-factor").textContent = rate > MIN_OVERLAP ? "a matching cost factor would be created" : "below the factor threshold";
  const canvas = $("ov-canvas");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const view = { cx: canvas.width / 2, cy: canvas.height / 2, x0: 2.5, y0: 0, scale: canvas.width / 60 };
  drawCloud(ctx, targetXY, "#999", view);
  drawCloud(ctx, scene.source_xy(dx, dy, yaw), "#1f6fd1", view);
  if (registered) drawCloud(ctx, registered, "#2ca02c", view);
}

function register() {
  const [dx, dy, yaw] = [num("ov-dx"), num("ov-dy"), num("ov-yaw")];
  const r = scene.register(dx, dy, yaw);
  const errors = Array.from(r.errors);
  $("rg-summary").innerHTML = [
    `${r.iterations} LM iterations`,
    `translation error ${r.translation_error.toFixed(4)} m`,
    `rotation error ${r.rotation_error_deg.toFixed(3)}°`,
    `overlap ${(100 * r.initial_overlap).toFixed(1)} % → ${(100 * r.final_overlap).toFixed(1)} %`,
  ].join("<br>");
  plotLine($("rg-canvas"), errors, Math.max(...errors), "#d62728", "attempt");
  drawOverlap(r.source_xy);
  r.free();
}

async function main() {
  await init();
  $("status").textContent = "";
  for (const id of ["tk-width", "tk-offset"]) $(id).addEventListener("input", drawTukey);
  for (const id of ["ov-dx", "ov-dy", "ov-yaw"]) $(id).addEventListener("input", () => drawOverlap());
  $("ov-res").addEventListener("change", rebuildScene);
  $("rg-run").addEventListener("click", register);
  drawTukey();
  rebuildScene();
}

main().catch((e) => {
  $("status").textContent = `failed: ${e}`;
});
