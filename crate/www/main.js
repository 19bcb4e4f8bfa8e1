import init, { simulate_and_fit, run_test_demo, transform_profile } from "./pkg/smallnoise_gof_web.js";

const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];
const $ = (id) => document.getElementById(id);

function params() {
  return {
    model: $("model").value,
    theta: Number($("theta").value),
    epsilon: Number($("epsilon").value),
    amplitude: Number($("amplitude").value),
    seed: Number($("seed").value) >>> 0,
  };
}

function plot(canvas, title, series, vline) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 40;
  ctx.clearRect(0, 0, w, h);
  let xmin = Infinity, xmax = -Infinity, ymin = Infinity, ymax = -Infinity;
  for (const s of series) {
    for (let i = 0; i < s.curve.t.length; i++) {
      const y = s.curve.y[i];
      if (!Number.isFinite(y)) continue;
      xmin = Math.min(xmin, s.curve.t[i]); xmax = Math.max(xmax, s.curve.t[i]);
      ymin = Math.min(ymin, y); ymax = Math.max(ymax, y);
    }
  }
  if (ymax === ymin) { ymax += 1; ymin -= 1; }
  const px = (x) => pad + (x - xmin) / (xmax - xmin) * (w - 2 * pad);
  const py = (y) => h - pad - (y - ymin) / (ymax - ymin) * (h - 2 * pad);

  ctx.strokeStyle = "#888";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#222";
  ctx.font = "12px sans-serif";
  ctx.fillText(title, pad, pad - 10);
  ctx.fillText(ymax.toPrecision(3), 2, pad + 4);
  ctx.fillText(ymin.toPrecision(3), 2, h - pad);
  ctx.fillText(xmin.toPrecision(3), pad, h - pad + 16);
  ctx.fillText(xmax.toPrecision(3), w - pad - 20, h - pad + 16);

  if (vline !== undefined) {
    ctx.setLineDash([4, 4]);
    ctx.beginPath(); ctx.moveTo(px(vline), pad); ctx.lineTo(px(vline), h - pad); ctx.stroke();
    ctx.setLineDash([]);
  }
  series.forEach((s, k) => {
    ctx.strokeStyle = COLORS[k % COLORS.length];
    ctx.beginPath();
    let started = false;
    s.curve.t.forEach((t, i) => {
      const y = s.curve.y[i];
      if (!Number.isFinite(y)) { started = false; return; }
      if (started) ctx.lineTo(px(t), py(y)); else { ctx.moveTo(px(t), py(y)); started = true; }
    });
    ctx.stroke();
    ctx.fillStyle = ctx.strokeStyle;
    ctx.fillText(s.name, w - pad - 120, pad + 16 + 14 * k);
  });
}

function show(text, isError) {
  $("summary").textContent = text;
  $("summary").className = isError ? "err" : "";
}

function guarded(f) {
  return () => {
    try { f(); } catch (e) { show(String(e), true); }
  };
}

const clip = (c, r) => {
  const keep = c.t.map((t) => t <= r);
  return { t: c.t.filter((_, i) => keep[i]), y: c.y.filter((_, i) => keep[i]) };
};

await init();

$("fit").onclick = guarded(() => {
  const p = params();
  const r = JSON.parse(simulate_and_fit(p.model, p.theta, p.epsilon, p.seed, 2000));
  show(`θ* = ${r.theta_star.toFixed(5)}   distance = ${r.distance.toExponential(3)}${r.boundary ? "   (at boundary)" : ""}`);
  plot($("top"), "observed X and fitted flow x(θ*)", [
    { name: "observed", curve: r.observed },
    { name: "fitted", curve: r.fitted },
  ]);
  const resid = { t: r.observed.t, y: r.observed.y.map((y, i) => (y - r.fitted.y[i]) / p.epsilon) };
  plot($("bottom"), "(X − x(θ*)) / ε", [{ name: "residual", curve: resid }]);
});

$("test").onclick = guarded(() => {
  const p = params();
  const r = JSON.parse(run_test_demo(p.model, p.theta, p.epsilon, p.amplitude, p.seed));
  show(`θ* = ${r.theta_star.toFixed(5)}   Δ = ${r.delta_eps.toFixed(4)}   c(0.05) = ${r.c_alpha.toFixed(4)}   ` +
    (r.reject ? "REJECT" : "accept") + `   φ₂ ≤ 0 on ${(100 * r.phi2_nonpositive_fraction).toFixed(1)}% of [0, r]`);
  plot($("top"), "observed X", [{ name: "X", curve: r.observed }]);
  plot($("bottom"), "U_ε and W̃ (normalized time)", [
    { name: "U_ε", curve: r.big_u },
    { name: "W̃", curve: clip(r.w_tilde, r.r_cut) },
  ], r.r_cut);
});

$("profile").onclick = guarded(() => {
  const p = params();
  const r = JSON.parse(transform_profile(p.model, p.theta));
  show(`∫g² = ${r.g_norm_squared.toFixed(8)}   R₀ ${r.r0_holds ? "holds" : "fails"}   min φ₂ on [0, ${r.r_cut}] = ${r.phi2_min.toExponential(3)}`);
  plot($("top"), "h and g", [{ name: "h", curve: r.h }, { name: "g", curve: r.g }]);
  plot($("bottom"), "transform coefficients", [
    { name: "φ₁", curve: r.phi1 }, { name: "φ₂", curve: r.phi2 },
    { name: "ψ₁", curve: r.psi1 }, { name: "ψ₂", curve: r.psi2 },
  ], r.r_cut);
});
