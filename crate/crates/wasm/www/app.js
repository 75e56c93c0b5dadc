// Static driver for the demo page. Expects the wasm-bindgen output in
// ./pkg (see the repository README for the one-line build).

import init, { walk_json, lambda_curve_json, stability_scan_json } from "./pkg/hzd_walker_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => parseFloat($(id).value);

function parse(json, statusId) {
  const data = JSON.parse(json);
  $(statusId).textContent = data.error ? data.error : "";
  return data.error ? null : data;
}

// --- tiny plotting helpers -------------------------------------------------

function frame(canvas) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  return ctx;
}

function mapper(xr, yr, canvas, pad = 34) {
  const sx = (canvas.width - 2 * pad) / (xr[1] - xr[0] || 1);
  const sy = (canvas.height - 2 * pad) / (yr[1] - yr[0] || 1);
  return {
    x: (v) => pad + (v - xr[0]) * sx,
    y: (v) => canvas.height - pad - (v - yr[0]) * sy,
  };
}

function axes(ctx, canvas, m, xr, yr, xlab, ylab) {
  ctx.strokeStyle = "#ccc";
  ctx.fillStyle = "#777";
  ctx.font = "11px system-ui";
  ctx.lineWidth = 1;
  ctx.strokeRect(m.x(xr[0]), m.y(yr[1]), m.x(xr[1]) - m.x(xr[0]), m.y(yr[0]) - m.y(yr[1]));
  ctx.fillText(`${xlab}: ${xr[0].toPrecision(3)} … ${xr[1].toPrecision(3)}`, m.x(xr[0]), canvas.height - 8);
  ctx.save();
  ctx.translate(12, m.y(yr[0]));
  ctx.rotate(-Math.PI / 2);
  ctx.fillText(`${ylab}: ${yr[0].toPrecision(3)} … ${yr[1].toPrecision(3)}`, 0, 0);
  ctx.restore();
}

function polyline(ctx, m, pts, color, width = 1.6) {
  if (!pts.length) return;
  ctx.strokeStyle = color;
  ctx.lineWidth = width;
  ctx.beginPath();
  ctx.moveTo(m.x(pts[0][0]), m.y(pts[0][1]));
  for (const p of pts) ctx.lineTo(m.x(p[0]), m.y(p[1]));
  ctx.stroke();
}

// --- panel 1: walk ----------------------------------------------------------

function drawWalk() {
  const data = parse(
    walk_json(num("walk-c"), num("walk-t"), 0.7, num("walk-a"),
              num("walk-px"), num("walk-py"), Math.round(num("walk-n"))),
    "walk-status");
  if (!data) return;
  if (data.classification === "diverged") {
    $("walk-status").textContent = data.diverged_at != null
      ? `diverged at step ${data.diverged_at}`
      : "not synchronizing: |L| grows";
  }

  const canvas = $("walk-top");
  const ctx = frame(canvas);
  const xs = [], ys = [];
  for (const s of data.steps) {
    for (const p of s.com) { xs.push(p[0]); ys.push(p[1]); }
    xs.push(s.stance[0]); ys.push(s.stance[1]);
  }
  const xr = [Math.min(...xs) - 0.1, Math.max(...xs) + 0.1];
  const yr = [Math.min(...ys) - 0.12, Math.max(...ys) + 0.12];
  // keep the aspect ratio sane for a top view
  const m = mapper(xr, yr, canvas);
  axes(ctx, canvas, m, xr, yr, "x (m)", "y (m)");

  for (const s of data.steps) {
    polyline(ctx, m, s.foot.map((p) => [p[0], p[1]]), "#b3b3b3", 1);
  }
  for (const s of data.steps) {
    polyline(ctx, m, s.com.map((p) => [p[0], p[1]]), "#2471a3", 1.8);
    ctx.fillStyle = "#c0392b";
    ctx.beginPath();
    ctx.arc(m.x(s.stance[0]), m.y(s.stance[1]), 4, 0, 2 * Math.PI);
    ctx.fill();
  }

  // per-step |L| bars on a log scale
  const bars = $("walk-sync");
  const bctx = frame(bars);
  const ls = data.steps.map((s) => Math.abs(s.sync_measure ?? NaN)).filter((v) => !Number.isNaN(v));
  if (!ls.length) {
    bctx.fillStyle = "#777";
    bctx.fillText("variable-height gait: L is a flat-gait diagnostic", 20, 30);
    return;
  }
  const logs = ls.map((v) => Math.log10(Math.max(v, 1e-16)));
  const lo = Math.min(...logs) - 0.5, hi = Math.max(...logs) + 0.5;
  const bm = mapper([0, ls.length], [lo, hi], bars);
  axes(bctx, bars, bm, [0, ls.length], [lo, hi], "step", "log10 |L|");
  bctx.fillStyle = "#2471a3";
  for (let i = 0; i < logs.length; i++) {
    const x0 = bm.x(i + 0.15), x1 = bm.x(i + 0.85);
    bctx.fillRect(x0, bm.y(logs[i]), x1 - x0, bm.y(lo) - bm.y(logs[i]));
  }
}

// --- panel 2: lambda curve ---------------------------------------------------

function drawLambda() {
  const data = parse(
    lambda_curve_json(num("lam-t"), num("lam-z0"), num("lam-cmin"), num("lam-cmax"), 400),
    "lam-status");
  if (!data) return;
  const canvas = $("lam-plot");
  const ctx = frame(canvas);
  const clipped = data.lambda.map((v) => Math.max(-2.5, Math.min(2.5, v)));
  const xr = [data.c[0], data.c[data.c.length - 1]];
  const yr = [-2.5, 2.5];
  const m = mapper(xr, yr, canvas);

  // contraction band
  ctx.fillStyle = "rgba(36,113,163,0.12)";
  const bx0 = m.x(Math.max(data.range[0], xr[0]));
  const bx1 = m.x(Math.min(data.range[1], xr[1]));
  ctx.fillRect(bx0, m.y(yr[1]), bx1 - bx0, m.y(yr[0]) - m.y(yr[1]));

  axes(ctx, canvas, m, xr, yr, "C", "lambda_L");
  for (const level of [-1, 0, 1]) {
    ctx.strokeStyle = level === 0 ? "#bbb" : "#e0b4ae";
    ctx.setLineDash([4, 4]);
    ctx.beginPath();
    ctx.moveTo(m.x(xr[0]), m.y(level));
    ctx.lineTo(m.x(xr[1]), m.y(level));
    ctx.stroke();
    ctx.setLineDash([]);
  }
  polyline(ctx, m, data.c.map((c, i) => [c, clipped[i]]), "#c0392b", 2);
  ctx.fillStyle = "#222";
  ctx.beginPath();
  ctx.arc(m.x(data.c_opt), m.y(0), 4.5, 0, 2 * Math.PI);
  ctx.fill();
  $("lam-status").textContent =
    `contraction for ${data.range[0].toFixed(3)} < C < ${data.range[1].toFixed(3)}; ` +
    `launch velocities (${data.xdot0.toFixed(4)}, ${data.ydot0.toFixed(4)}) 1/s`;
}

// --- panel 3: stabilization scan ----------------------------------------------

function drawScan() {
  $("scan-status").textContent = "solving…";
  // let the browser paint the status before the solves run
  setTimeout(() => {
    const data = parse(
      stability_scan_json(num("scan-c"), num("scan-t"), 0.7, num("scan-amax"),
                          Math.round(num("scan-n"))),
      "scan-status");
    if (!data) return;
    if (data.failed_at != null) {
      $("scan-status").textContent = `no periodic gait past a = ${data.failed_at.toFixed(3)}`;
    } else {
      $("scan-status").textContent = "";
    }
    const pts = data.points;
    if (!pts.length) return;

    const eigen = $("scan-eigen");
    const ctx = frame(eigen);
    const ar = [0, pts[pts.length - 1].a || 1e-3];
    const m = mapper(ar, [0, 1.15], eigen);
    axes(ctx, eigen, m, ar, [0, 1.15], "a (m)", "|eigenvalue|");
    ctx.strokeStyle = "#e0b4ae";
    ctx.setLineDash([4, 4]);
    ctx.beginPath();
    ctx.moveTo(m.x(ar[0]), m.y(1));
    ctx.lineTo(m.x(ar[1]), m.y(1));
    ctx.stroke();
    ctx.setLineDash([]);
    const colors = ["#c0392b", "#2471a3", "#7d9b76"];
    for (let k = 0; k < 3; k++) {
      polyline(ctx, m, pts.map((p) => [p.a, p.eigen_mags[k]]), colors[k], 2);
    }

    const shift = $("scan-shift");
    const sctx = frame(shift);
    const dmax = Math.max(...pts.map((p) => Math.max(p.dx, p.dy)), 1e-4) * 1.15;
    const sm = mapper(ar, [0, dmax], shift);
    axes(sctx, shift, sm, ar, [0, dmax], "a (m)", "stance shift");
    polyline(sctx, sm, pts.map((p) => [p.a, p.dx]), "#c0392b", 2);
    polyline(sctx, sm, pts.map((p) => [p.a, p.dy]), "#2471a3", 2);
    sctx.fillStyle = "#c0392b";
    sctx.fillText("D_X", sm.x(ar[1] * 0.9), sm.y(pts[pts.length - 1].dx) - 6);
    sctx.fillStyle = "#2471a3";
    sctx.fillText("D_Y", sm.x(ar[1] * 0.9), sm.y(pts[pts.length - 1].dy) + 14);
  }, 20);
}

await init();
$("walk-run").addEventListener("click", drawWalk);
$("lam-run").addEventListener("click", drawLambda);
$("scan-run").addEventListener("click", drawScan);
drawWalk();
drawLambda();
drawScan();
