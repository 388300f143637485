import init, { simulate, checkCompat, lifting } from "./pkg/kdvstar_web.js";

const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

// c (x/L)^4 (1 - x/L)^5 as monomial coefficients
function bump(c, L) {
  const binom = [1, 5, 10, 10, 5, 1];
  const out = new Array(10).fill(0);
  for (let k = 0; k <= 5; k++) out[4 + k] = c * (k % 2 ? -1 : 1) * binom[k] / L ** (k + 4);
  return out;
}

const QUINTIC = [
  [0.5, 0.8, -1.1, 0.6, 0.3, -0.25],
  [0.5, -0.4, 0.9, -0.7, 0.5, -0.15],
  [0.5, 0.2, 0.3, -0.9, 0.6, -0.2],
];

const PRESETS = {
  "Energy decay (homogeneous data)": {
    graph: { n_edges: 3, lengths: [8, 8, 8], alpha: 2 },
    initial: { poly: [1, -0.6, -0.4].map((a) => bump(100 * a, 8)) },
    horizon: 5, nodes_per_edge: 128, mode: "nonlinear",
    picard: { tol: 1e-12, max_iter: 30 }, compat: { s: 6 },
  },
  "Manufactured solution (nonlinear)": {
    graph: { n_edges: 3, lengths: [1, 1.25, 1.5], alpha: 2 },
    manufactured: { poly: QUINTIC.map((p) => p.map((c) => [0.1 * c, 0.05 * c, 0.025 * c])) },
    horizon: 1, nodes_per_edge: 64, mode: "nonlinear", picard: { tol: 1e-10 },
  },
  "Driven vertex (g0 = 3)": {
    graph: { n_edges: 3, lengths: [1, 1, 1], alpha: 2 },
    initial: { poly: [[1, -1], [1, -1], [1, -1]] },
    signals: { g0: { poly: [3] }, g: [{ poly: [-1] }, { poly: [-1] }, { poly: [-1] }], p: [{ poly: [] }, { poly: [] }, { poly: [] }] },
    horizon: 1, nodes_per_edge: 64, mode: "nonlinear",
  },
  "Incompatible vertex (g0 = 3.25)": {
    graph: { n_edges: 3, lengths: [1, 1, 1], alpha: 2 },
    initial: { poly: [[1, -1], [1, -1], [1, -1]] },
    signals: { g0: { poly: [3.25] }, g: [{ poly: [-1] }, { poly: [-1] }, { poly: [-1] }], p: [{ poly: [] }, { poly: [] }, { poly: [] }] },
    horizon: 1, nodes_per_edge: 64, mode: "nonlinear", compat: { s: 2.8 },
  },
};

const $ = (id) => document.getElementById(id);
let view = null;
let timer = null;

function status(msg, isError = false) {
  $("status").textContent = msg;
  $("status").className = isError ? "error" : "";
}

function extent(values) {
  let lo = Infinity, hi = -Infinity;
  for (const v of values) if (Number.isFinite(v)) { lo = Math.min(lo, v); hi = Math.max(hi, v); }
  if (!(hi > lo)) { const c = Number.isFinite(lo) ? lo : 0; lo = c - 1; hi = c + 1; }
  const pad = 0.05 * (hi - lo);
  return [lo - pad, hi + pad];
}

// series: [{x: [], y: [], color}]
function plot(canvas, series, { xlabel = "", ylabel = "", xr, yr, logy = false } = {}) {
  const ctx = canvas.getContext("2d");
  const W = canvas.width, H = canvas.height, m = { l: 70, r: 16, t: 16, b: 44 };
  ctx.clearRect(0, 0, W, H);
  const tf = logy ? (v) => (v > 0 ? Math.log10(v) : NaN) : (v) => v;
  xr = xr || extent(series.flatMap((s) => s.x));
  yr = yr || extent(series.flatMap((s) => s.y.map(tf)));
  const px = (x) => m.l + ((x - xr[0]) / (xr[1] - xr[0])) * (W - m.l - m.r);
  const py = (y) => H - m.b - ((y - yr[0]) / (yr[1] - yr[0])) * (H - m.t - m.b);

  ctx.strokeStyle = "#888";
  ctx.fillStyle = "#444";
  ctx.font = "20px system-ui";
  ctx.lineWidth = 1;
  ctx.strokeRect(m.l, m.t, W - m.l - m.r, H - m.t - m.b);
  for (let i = 0; i <= 4; i++) {
    const yv = yr[0] + (i / 4) * (yr[1] - yr[0]);
    const label = logy ? `1e${yv.toFixed(1)}` : yv.toPrecision(3);
    ctx.fillText(label, 4, py(yv) + 6);
    const xv = xr[0] + (i / 4) * (xr[1] - xr[0]);
    ctx.fillText(xv.toPrecision(3), px(xv) - 16, H - m.b + 24);
  }
  ctx.fillText(xlabel, W / 2 - 10, H - 4);
  ctx.fillText(ylabel, m.l + 8, m.t + 22);

  ctx.lineWidth = 2.5;
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.beginPath();
    let pen = false;
    s.x.forEach((x, i) => {
      const y = tf(s.y[i]);
      if (!Number.isFinite(y)) { pen = false; return; }
      pen ? ctx.lineTo(px(x), py(y)) : ctx.moveTo(px(x), py(y));
      pen = true;
    });
    ctx.stroke();
  }
}

function legend(names) {
  $("legend").innerHTML = names.map((n, j) => `<span style="color:${COLORS[j % COLORS.length]}">&#9632; ${n}</span>`).join("");
}

function drawFrame(k) {
  if (!view) return;
  const all = view.edges.flatMap((e) => e.u.flat());
  const xmax = Math.max(...view.edges.map((e) => e.x[e.x.length - 1]));
  plot($("solution"), view.edges.map((e, j) => ({ x: e.x, y: e.u[k], color: COLORS[j % COLORS.length] })), {
    xlabel: "distance from vertex", ylabel: "u", xr: [0, xmax], yr: extent(all),
  });
  $("time").textContent = `t = ${view.times[k].toFixed(4)}`;
}

function drawEnergy() {
  const series = [{ x: view.energy_times, y: view.energy, color: "#1f77b4" }];
  plot($("energy"), series, { xlabel: "t", ylabel: "energy" });
}

function config() {
  return $("config").value;
}

function onRun() {
  stop();
  status("running...");
  const start = performance.now();
  try {
    view = JSON.parse(simulate(config()));
  } catch (e) {
    status(String(e), true);
    return;
  }
  const ms = (performance.now() - start).toFixed(0);
  const resid = Math.max(...view.ledger_residual.map(Math.abs));
  let msg = `${view.times.length} frames in ${ms} ms; max Picard iterations ${view.max_picard_iterations}; max ledger residual ${resid.toExponential(2)}`;
  if (view.l2_error) msg += `; final L2 error ${view.l2_error[view.l2_error.length - 1].toExponential(2)}`;
  if (view.warnings.length) msg += `\nwarning: ${view.warnings.join("; ")}`;
  status(msg);
  $("frame").max = view.times.length - 1;
  $("frame").value = 0;
  legend(view.edges.map((_, j) => `edge ${j + 1}`));
  drawFrame(0);
  drawEnergy();
}

function onCompat() {
  let report;
  try {
    report = JSON.parse(checkCompat(config(), parseFloat($("s").value)));
  } catch (e) {
    status(String(e), true);
    return;
  }
  status(`s = ${report.s}: ${report.verdict ? "compatible" : "incompatible"} (${report.records.length} conditions, tol ${report.tol})`);
  const rows = report.records.map((r) => {
    const req = `${r.requirement.kind} (k=${r.requirement.level})`;
    const edge = r.edge === null ? "" : r.edge + 1;
    return `<tr class="${r.pass ? "" : "fail"}"><td>${req}</td><td>${edge}</td><td>${r.left.toPrecision(6)}</td><td>${r.right.toPrecision(6)}</td><td>${r.residual.toExponential(2)}</td></tr>`;
  });
  $("compat-out").innerHTML = `<table><tr><th>condition</th><th>edge</th><th>data</th><th>signal</th><th>residual</th></tr>${rows.join("")}</table>`;
}

function onLift() {
  stop();
  let profiles;
  try {
    profiles = JSON.parse(lifting(config(), 101));
  } catch (e) {
    status(String(e), true);
    return;
  }
  const series = [];
  const names = [];
  profiles.forEach((p, j) => {
    const c = COLORS[j % COLORS.length];
    series.push({ x: p.x, y: p.phi, color: c }, { x: p.x, y: p.psi, color: c }, { x: p.x, y: p.theta, color: c });
    names.push(`edge ${j + 1}`);
  });
  view = null;
  legend(names);
  plot($("solution"), series, { xlabel: "distance from vertex", ylabel: "phi, psi, theta" });
  status("lifting profiles: psi rises to 1 at the outer end, theta has unit slope there, phi carries the vertex flux");
}

function stop() {
  if (timer) clearInterval(timer);
  timer = null;
  $("play").textContent = "Play";
}

function onPlay() {
  if (timer) return stop();
  if (!view) return;
  $("play").textContent = "Pause";
  timer = setInterval(() => {
    const next = (parseInt($("frame").value, 10) + 1) % view.times.length;
    $("frame").value = next;
    drawFrame(next);
  }, 60);
}

async function main() {
  await init();
  for (const name of Object.keys(PRESETS)) {
    const o = document.createElement("option");
    o.textContent = name;
    $("preset").appendChild(o);
  }
  const load = () => { $("config").value = JSON.stringify(PRESETS[$("preset").value], null, 1); };
  $("preset").addEventListener("change", load);
  load();
  $("run").addEventListener("click", onRun);
  $("compat").addEventListener("click", onCompat);
  $("lift").addEventListener("click", onLift);
  $("play").addEventListener("click", onPlay);
  $("frame").addEventListener("input", (e) => { stop(); drawFrame(parseInt(e.target.value, 10)); });
  status("ready");
}

main().catch((e) => status(String(e), true));
