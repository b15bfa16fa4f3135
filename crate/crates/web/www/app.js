import init, { spectrum_curves, simulate_decay, front_profile } from "./pkg/frontlab_web.js";

const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

function read(section) {
  const v = {};
  for (const el of section.querySelectorAll("input")) {
    v[el.name] = el.type === "checkbox" ? el.checked : Number(el.value);
  }
  return v;
}

function bounds(series, pick) {
  let lo = Infinity, hi = -Infinity;
  for (const s of series) for (const p of s.points) {
    const x = pick(p);
    if (Number.isFinite(x)) { lo = Math.min(lo, x); hi = Math.max(hi, x); }
  }
  if (lo === hi) { lo -= 1; hi += 1; }
  const pad = 0.05 * (hi - lo);
  return [lo - pad, hi + pad];
}

// series: [{label, color, points: [[x, y], ...], dots}]
function plot(canvas, series, { xlabel, ylabel, vlines = [] }) {
  const ctx = canvas.getContext("2d");
  const W = canvas.width, H = canvas.height, m = 48;
  ctx.clearRect(0, 0, W, H);
  const [x0, x1] = bounds(series, p => p[0]);
  const [y0, y1] = bounds(series, p => p[1]);
  const sx = x => m + (x - x0) / (x1 - x0) * (W - 2 * m);
  const sy = y => H - m - (y - y0) / (y1 - y0) * (H - 2 * m);

  ctx.strokeStyle = "#999"; ctx.fillStyle = "#444"; ctx.font = "12px sans-serif";
  ctx.strokeRect(m, m, W - 2 * m, H - 2 * m);
  for (let i = 0; i <= 4; i++) {
    const x = x0 + (x1 - x0) * i / 4, y = y0 + (y1 - y0) * i / 4;
    ctx.fillText(x.toPrecision(3), sx(x) - 12, H - m + 16);
    ctx.fillText(y.toPrecision(3), 4, sy(y) + 4);
  }
  ctx.fillText(xlabel, W / 2, H - 8);
  ctx.fillText(ylabel, 4, m - 12);
  if (x0 < 0 && x1 > 0) {
    ctx.setLineDash([4, 4]);
    ctx.beginPath(); ctx.moveTo(sx(0), m); ctx.lineTo(sx(0), H - m); ctx.stroke();
    ctx.setLineDash([]);
  }
  for (const [x, color] of vlines) {
    ctx.strokeStyle = color;
    ctx.beginPath(); ctx.moveTo(sx(x), m); ctx.lineTo(sx(x), H - m); ctx.stroke();
  }

  series.forEach((s, k) => {
    ctx.strokeStyle = ctx.fillStyle = s.color;
    if (s.dots) {
      for (const [x, y] of s.points) ctx.fillRect(sx(x) - 1, sy(y) - 1, 2, 2);
    } else {
      ctx.beginPath();
      s.points.forEach(([x, y], i) => (i ? ctx.lineTo(sx(x), sy(y)) : ctx.moveTo(sx(x), sy(y))));
      ctx.stroke();
    }
    ctx.fillText(s.label, W - m - 150, m + 16 + 16 * k);
  });
}

function wire(id, action) {
  const section = document.getElementById(id);
  const out = section.querySelector(".out");
  const canvas = section.querySelector("canvas");
  const go = () => {
    out.classList.remove("err");
    try {
      out.textContent = action(read(section), canvas);
    } catch (e) {
      out.classList.add("err");
      out.textContent = String(e.message ?? e);
    }
  };
  section.querySelector("button").addEventListener("click", go);
  go();
}

function spectrum(p, canvas) {
  const d = spectrum_curves(p.epsilon, p.kappa, p.c, p.alpha, 801);
  const m = d[2], row = 5;
  const branches = [];
  for (let half = 0; half < 2; half++) {
    for (let b = 0; b < 2; b++) {
      const pts = [];
      for (let i = 0; i < m; i++) {
        const o = 3 + (half * m + i) * row;
        pts.push([d[o + 1 + 2 * b], d[o + 2 + 2 * b]]);
      }
      branches.push({
        label: `${half ? "weighted" : "unweighted"} λ${b + 1}`,
        color: COLORS[2 * half + b],
        points: pts,
        dots: true,
      });
    }
  }
  plot(canvas, branches, { xlabel: "Re λ", ylabel: "Im λ", vlines: [[d[1], "#d62728"]] });
  return `abscissa unweighted ${d[0].toFixed(6)}   weighted ${d[1].toFixed(6)}   (α² − cα = ${(p.alpha * p.alpha - p.c * p.alpha).toFixed(6)})`;
}

function decay(p, canvas) {
  const d = simulate_decay(p.epsilon, p.kappa, p.c, p.alpha, p.eta, p.t_final, p.nonlinear);
  const names = ["‖v1‖₀", "‖v2‖₀", "‖v‖_α", "‖v‖_E"];
  const series = names.map((label, j) => ({ label: `log ${label}`, color: COLORS[j], points: [] }));
  for (let o = 4; o + 5 <= d.length; o += 5) {
    for (let j = 0; j < 4; j++) {
      const y = d[o + 1 + j];
      if (y > 0) series[j].points.push([d[o], Math.log(y)]);
    }
  }
  plot(canvas, series, { xlabel: "t", ylabel: "log norm" });
  return `weighted rate  fitted ${d[0].toFixed(4)}   cα − α² = ${d[1].toFixed(4)}\n` +
         `‖v2‖₀ rate     fitted ${d[2].toFixed(4)}   κe^(−κ) = ${d[3].toFixed(4)}`;
}

function front(p, canvas) {
  const d = front_profile(p.kappa, 600);
  const names = ["φ1 (temperature)", "φ2 (fuel)", "φ3 = φ1′"];
  const series = names.map((label, j) => ({ label, color: COLORS[j], points: [] }));
  for (let o = 2; o + 4 <= d.length; o += 4) {
    for (let j = 0; j < 3; j++) series[j].points.push([d[o], d[o + 1 + j]]);
  }
  plot(canvas, series, { xlabel: "z", ylabel: "φ" });
  return `c* = ${d[0].toFixed(10)}   φ1 at left end = ${d[1].toFixed(10)}   (1/κ = ${(1 / p.kappa).toFixed(10)})`;
}

await init();
wire("spectrum", spectrum);
wire("decay", decay);
wire("front", front);
