import init, { parseBoxes, regionAreas, groundSynthetic } from "./pkg/trig_demo.js";

const IMAGE = 200;
const GRID = 16;
const $ = (id) => document.getElementById(id);

function readGt() {
  const nums = $("gt").value.split(/[\s,]+/).filter(Boolean).map(Number);
  return Uint32Array.from(nums.slice(0, nums.length - (nums.length % 4)));
}

function drawRects(ctx, flat, color, scale = 1) {
  ctx.strokeStyle = color;
  for (let i = 0; i < flat.length; i += 4) {
    const [x1, y1, x2, y2] = flat.slice(i, i + 4);
    ctx.strokeRect(x1 * scale + 0.5, y1 * scale + 0.5, (x2 - x1) * scale - 1, (y2 - y1) * scale - 1);
  }
}

function updateParse() {
  const canvas = $("boxes");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  try {
    const gt = readGt();
    const pred = parseBoxes($("response").value, $("fmt").value, IMAGE, IMAGE, Number($("scale").value) || 1);
    drawRects(ctx, gt, "#2a2");
    drawRects(ctx, pred, "#d22");
    const [p, g, inter, union, iou] = regionAreas(pred, gt);
    $("areas").textContent =
      `parsed boxes  ${pred.length / 4}\n` +
      `pred area     ${p}\ngt area       ${g}\n` +
      `intersection  ${inter}\nunion         ${union}\n` +
      `pixel IoU     ${iou.toFixed(4)}`;
  } catch (e) {
    $("areas").textContent = String(e);
  }
}

function updateGround() {
  const canvas = $("heat");
  const ctx = canvas.getContext("2d");
  const cell = canvas.width / GRID;
  const scale = canvas.width / IMAGE;
  try {
    const r = groundSynthetic(
      Number($("seed").value) >>> 0, GRID, IMAGE, readGt(), Number($("noise").value),
      Number($("k1").value), Number($("k2").value), Number($("window").value),
    );
    const heat = r.heatmap;
    const lo = Math.min(...heat), hi = Math.max(...heat);
    heat.forEach((v, i) => {
      const t = hi > lo ? (v - lo) / (hi - lo) : 0;
      ctx.fillStyle = `rgb(${Math.round(255 * t)}, ${Math.round(120 * t)}, ${Math.round(255 * (1 - t))})`;
      ctx.fillRect((i % GRID) * cell, Math.floor(i / GRID) * cell, cell, cell);
    });
    drawRects(ctx, readGt(), "#2f2", scale);
    drawRects(ctx, r.boxes, "#fff", scale);
    $("groundOut").textContent = `selected patches ${r.selected.length}\npixel IoU        ${r.iou.toFixed(4)}`;
    r.free();
  } catch (e) {
    $("groundOut").textContent = String(e);
  }
}

await init();
for (const id of ["fmt", "scale", "response", "gt"]) $(id).addEventListener("input", () => { updateParse(); updateGround(); });
for (const id of ["noise", "k1", "k2", "window", "seed"]) $(id).addEventListener("input", updateGround);
updateParse();
updateGround();
