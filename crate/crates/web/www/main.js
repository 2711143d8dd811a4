import init, { torque_spline, riemannian_spline, geodesic, indicatrix_grid, sample_box }
  from "./pkg/biased_spline_web.js";

const canvas = document.getElementById("chart");
const ctx = canvas.getContext("2d");
const $ = (id) => document.getElementById(id);
const handles = [{ lam: -0.8, phi: 0.3 }, { lam: 0.8, phi: 0.3 }];
let box, dragging = null;

const margin = 30;
const toPx = (lam, phi) => [
  margin + (lam - box[0]) / (box[1] - box[0]) * (canvas.width - 2 * margin),
  canvas.height - margin - (phi - box[2]) / (box[3] - box[2]) * (canvas.height - 2 * margin),
];
const fromPx = (x, y) => ({
  lam: box[0] + (x - margin) / (canvas.width - 2 * margin) * (box[1] - box[0]),
  phi: box[2] + (canvas.height - margin - y) / (canvas.height - 2 * margin) * (box[3] - box[2]),
});
const pxPerUnit = () => (canvas.width - 2 * margin) / (box[1] - box[0]);

function axes() {
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#eee";
  for (let lam = Math.ceil(box[0]); lam <= box[1]; lam++) {
    line(toPx(lam, box[2]), toPx(lam, box[3]));
  }
  for (let phi = -1; phi <= 1; phi += 0.5) line(toPx(box[0], phi), toPx(box[1], phi));
  ctx.strokeStyle = "#999";
  line(toPx(box[0], 0), toPx(box[1], 0));
  ctx.fillStyle = "#666";
  ctx.fillText("λ", canvas.width - 18, toPx(0, 0)[1] - 6);
  ctx.fillText("φ", toPx(0, 0)[0] + 6, 14);
}

function line([x0, y0], [x1, y1]) {
  ctx.beginPath(); ctx.moveTo(x0, y0); ctx.lineTo(x1, y1); ctx.stroke();
}

function indicatrices(form) {
  if (!form) return;
  const pts = indicatrix_grid("sphere_torque", form, 11, 7, 48);
  // normalize so the largest ellipse fits in a grid cell
  let r = 0;
  for (let i = 0; i < pts.length; i += 4) r = Math.max(r, Math.hypot(pts[i + 2], pts[i + 3]));
  const scale = 0.45 * (box[1] - box[0]) / 11 / r;
  ctx.strokeStyle = "#8a8";
  ctx.beginPath();
  for (let i = 0; i < pts.length; i += 4) {
    const [x, y] = toPx(pts[i] + scale * pts[i + 2], pts[i + 1] + scale * pts[i + 3]);
    const first = (i / 4) % 48 === 0;
    if (first) { ctx.closePath(); ctx.moveTo(x, y); } else ctx.lineTo(x, y);
  }
  ctx.closePath();
  ctx.stroke();
}

function curve(c, color, dash = []) {
  if (!c.converged) return;
  const p = c.points;
  ctx.strokeStyle = color; ctx.lineWidth = 2; ctx.setLineDash(dash);
  ctx.beginPath();
  for (let i = 0; i < p.length; i += 3) {
    const [x, y] = toPx(p[i + 1], p[i + 2]);
    i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
  }
  ctx.stroke();
  ctx.lineWidth = 1; ctx.setLineDash([]);
}

function maxLat(c) {
  let m = -Infinity;
  for (let i = 2; i < c.points.length; i += 3) m = Math.max(m, c.points[i]);
  return m;
}

function describe(name, c) {
  if (!c.converged) return `${name}: no convergence (${c.message})`;
  return `${name}: cost ${c.cost.toFixed(4)}, max latitude ${maxLat(c).toFixed(4)}`;
}

function render() {
  const lon = +$("lon").value, lat = +$("lat").value;
  $("lon-v").textContent = lon.toFixed(2);
  $("lat-v").textContent = lat.toFixed(2);
  const [a, b] = handles;
  const q0 = new Float64Array([a.lam, a.phi]), qf = new Float64Array([b.lam, b.phi]);
  const v0 = new Float64Array([lon, lat]), vf = new Float64Array([lon, -lat]);

  axes();
  indicatrices($("form").value);
  const lines = [];
  if ($("show-geo").checked) {
    const g = geodesic("sphere_torque", q0, qf);
    curve(g, "#777", [6, 4]);
    lines.push(g.converged ? `geodesic:         length ${length(g).toFixed(4)}` : `geodesic: ${g.message}`);
  }
  const riemann = riemannian_spline(q0, v0, qf, vf);
  const torque = torque_spline(q0, v0, qf, vf);
  curve(riemann, "#2c6fbb");
  curve(torque, "#c0392b");
  lines.unshift(describe("torque spline   ", torque), describe("Riemannian cubic", riemann));
  for (const h of handles) {
    const [x, y] = toPx(h.lam, h.phi);
    ctx.fillStyle = "#222";
    ctx.beginPath(); ctx.arc(x, y, 6, 0, 2 * Math.PI); ctx.fill();
  }
  $("readout").textContent = lines.join("\n");
}

// arc length in the sphere metric cos²φ dλ² + dφ²
function length(c) {
  const p = c.points;
  let len = 0;
  for (let i = 3; i < p.length; i += 3) {
    const phi = 0.5 * (p[i + 2] + p[i - 1]);
    len += Math.hypot(Math.cos(phi) * (p[i + 1] - p[i - 2]), p[i + 2] - p[i - 1]);
  }
  return len;
}

function pointer(e) {
  const r = canvas.getBoundingClientRect();
  return [e.clientX - r.left, e.clientY - r.top];
}

canvas.addEventListener("pointerdown", (e) => {
  const [x, y] = pointer(e);
  dragging = handles.findIndex((h) => {
    const [hx, hy] = toPx(h.lam, h.phi);
    return Math.hypot(hx - x, hy - y) < 10;
  });
  if (dragging < 0) dragging = null;
});
canvas.addEventListener("pointermove", (e) => {
  if (dragging === null) return;
  const q = fromPx(...pointer(e));
  q.phi = Math.max(-1.15, Math.min(1.15, q.phi));
  handles[dragging] = q;
  const [x, y] = toPx(q.lam, q.phi);
  ctx.fillStyle = "#aaa";
  ctx.beginPath(); ctx.arc(x, y, 3, 0, 2 * Math.PI); ctx.fill();
});
// solving is too slow to repeat on every pointer move
window.addEventListener("pointerup", () => {
  if (dragging !== null) render();
  dragging = null;
});
for (const id of ["lon", "lat", "show-geo", "form"]) $(id).addEventListener("input", render);

await init();
box = Array.from(sample_box("sphere_torque"));
render();
