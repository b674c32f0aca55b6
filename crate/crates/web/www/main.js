import init, { orbit_weights, rotate_and_pool, expressivity } from "./pkg/gigp_web.js";

const $ = (id) => document.getElementById(id);
const numbers = (s) => s.split(",").map(Number).filter((x) => !Number.isNaN(x));
const colors = ["#1b6ca8", "#d1495b", "#2e8b57", "#e39b1b", "#7b3fa0", "#555"];

function drawAssignment() {
  const anchors = numbers($("anchors").value);
  const sigma = Number($("sigma").value);
  const ctx = $("assign").getContext("2d");
  const { width: w, height: h } = ctx.canvas;
  ctx.clearRect(0, 0, w, h);
  const rMax = 4;
  const rs = Array.from({ length: 200 }, (_, i) => (i / 199) * rMax);
  let weights;
  try {
    weights = JSON.parse(orbit_weights(new Float64Array(rs), new Float64Array(anchors), sigma)).weights;
  } catch (e) {
    ctx.fillText(String(e), 10, 20);
    return;
  }
  anchors.forEach((a, k) => {
    ctx.strokeStyle = colors[k % colors.length];
    ctx.beginPath();
    rs.forEach((r, i) => {
      const x = (r / rMax) * w, y = h - 10 - weights[i][k] * (h - 20);
      i ? ctx.lineTo(x, y) : ctx.moveTo(x, y);
    });
    ctx.stroke();
  });
}

let points = [[1, 0], [0.3, -1.6], [-1.1, 0.4], [0.8, 1.2]];

function drawCloud() {
  const ctx = $("cloud").getContext("2d");
  const { width: w, height: h } = ctx.canvas;
  const scale = w / 6;
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#eee";
  for (const r of [1, 2]) {
    ctx.beginPath();
    ctx.arc(w / 2, h / 2, r * scale, 0, 2 * Math.PI);
    ctx.stroke();
  }
  if (!points.length) {
    $("pooled").textContent = "";
    return;
  }
  const out = JSON.parse(rotate_and_pool(new Float64Array(points.flat()), Number($("angle").value), Number($("alpha").value)));
  const dot = (x, y, c) => {
    ctx.fillStyle = c;
    ctx.beginPath();
    ctx.arc(w / 2 + x * scale, h / 2 - y * scale, 4, 0, 2 * Math.PI);
    ctx.fill();
  };
  points.forEach(([x, y]) => dot(x, y, colors[0]));
  for (let i = 0; i < out.rotated_coords.length; i += 2) dot(out.rotated_coords[i], out.rotated_coords[i + 1], colors[1]);
  $("pooled").textContent =
    `pooled (blue)    ${out.pooled.map((v) => v.toFixed(9)).join(" ")}\n` +
    `pooled (red)     ${out.pooled_rotated.map((v) => v.toFixed(9)).join(" ")}\n` +
    `max difference   ${out.max_diff.toExponential(2)}`;
}

function runCheck() {
  try {
    const r = JSON.parse(expressivity(new Uint32Array(numbers($("sizes").value)), Number($("values").value), BigInt(Date.now())));
    $("report").textContent = Object.entries(r).map(([k, v]) => `${k} = ${v}`).join("\n");
  } catch (e) {
    $("report").textContent = String(e);
  }
}

await init();
for (const id of ["anchors", "sigma"]) $(id).addEventListener("input", drawAssignment);
for (const id of ["angle", "alpha"]) $(id).addEventListener("input", drawCloud);
$("cloud").addEventListener("click", (ev) => {
  const c = ev.target, scale = c.width / 6;
  points.push([(ev.offsetX - c.width / 2) / scale, (c.height / 2 - ev.offsetY) / scale]);
  drawCloud();
});
$("clear").addEventListener("click", () => { points = []; drawCloud(); });
$("run").addEventListener("click", runCheck);
drawAssignment();
drawCloud();
runCheck();
