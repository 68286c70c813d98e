import init, { beta_curve, clt_sample, condition_terms } from "./pkg/mixing_ustat_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function axes(ctx, w, h, pad) {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#888";
  ctx.beginPath();
  ctx.moveTo(pad, pad);
  ctx.lineTo(pad, h - pad);
  ctx.lineTo(w - pad, h - pad);
  ctx.stroke();
}

function report(id, text, isError) {
  $(id).textContent = text;
  $(id).className = isError ? "err" : "";
}

function drawBeta() {
  const canvas = $("beta-plot");
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 30;
  let values;
  try {
    values = beta_curve(num("bp"), num("bq"), num("bt"));
  } catch (e) {
    report("beta-msg", e.message ?? String(e), true);
    return;
  }
  axes(ctx, w, h, pad);
  const top = Math.max(...values, 1e-12);
  const x = (i) => pad + (i / Math.max(values.length - 1, 1)) * (w - 2 * pad);
  const y = (v) => h - pad - (v / top) * (h - 2 * pad);
  ctx.strokeStyle = "#1f5fa8";
  ctx.beginPath();
  values.forEach((v, i) => (i ? ctx.lineTo(x(i), y(v)) : ctx.moveTo(x(i), y(v))));
  ctx.stroke();
  ctx.fillStyle = "#333";
  ctx.fillText(top.toPrecision(3), 2, pad);
  ctx.fillText("t = 1", pad, h - 10);
  ctx.fillText(`t = ${values.length}`, w - pad - 30, h - 10);
  report("beta-msg", `β(1) = ${values[0].toPrecision(6)}, β(${values.length}) = ${values.at(-1).toExponential(3)}`);
}

function normalPdf(z) {
  return Math.exp(-0.5 * z * z) / Math.sqrt(2 * Math.PI);
}

function drawClt() {
  const canvas = $("clt-plot");
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 30;
  let sample;
  try {
    sample = clt_sample($("cp").value, $("ck").value, num("cn"), num("cr"), num("cs"));
  } catch (e) {
    report("clt-msg", e.message ?? String(e), true);
    return;
  }
  const z = sample.z;
  const bins = 40, lo = -4, hi = 4, width = (hi - lo) / bins;
  const counts = new Array(bins).fill(0);
  for (const v of z) {
    const b = Math.floor((v - lo) / width);
    if (b >= 0 && b < bins) counts[b] += 1;
  }
  const density = counts.map((c) => c / (z.length * width));
  const top = Math.max(...density, normalPdf(0)) * 1.05;
  const x = (v) => pad + ((v - lo) / (hi - lo)) * (w - 2 * pad);
  const y = (d) => h - pad - (d / top) * (h - 2 * pad);
  axes(ctx, w, h, pad);
  ctx.fillStyle = "#9cc3e6";
  density.forEach((d, i) => {
    const x0 = x(lo + i * width);
    ctx.fillRect(x0, y(d), x(lo + (i + 1) * width) - x0 - 1, h - pad - y(d));
  });
  ctx.strokeStyle = "#c0392b";
  ctx.beginPath();
  for (let i = 0; i <= 200; i++) {
    const v = lo + (i / 200) * (hi - lo);
    i ? ctx.lineTo(x(v), y(normalPdf(v))) : ctx.moveTo(x(v), y(normalPdf(v)));
  }
  ctx.stroke();
  ctx.fillStyle = "#333";
  ctx.fillText("−4", pad - 6, h - 10);
  ctx.fillText("4", w - pad - 4, h - 10);
  report("clt-msg", `KS distance to N(0, 1): ${sample.ks.toFixed(4)} over ${z.length} replicates`);
  sample.free();
}

function showTerms() {
  const out = $("terms-out");
  let rows;
  try {
    rows = condition_terms(num("tk"), num("tb"));
  } catch (e) {
    out.innerHTML = "";
    out.className = "err";
    out.textContent = e.message ?? String(e);
    return;
  }
  out.className = "";
  const fmt = (v) => v.toExponential(3);
  let html = "<table><tr><th>n</th><th>m<sub>n</sub></th><th>T1</th><th>T2</th></tr>";
  for (let i = 0; i < rows.length; i += 4) {
    html += `<tr><td>${rows[i]}</td><td>${rows[i + 1]}</td><td>${fmt(rows[i + 2])}</td><td>${fmt(rows[i + 3])}</td></tr>`;
  }
  out.innerHTML = html + "</table>";
}

await init();
$("beta-run").addEventListener("click", drawBeta);
$("clt-run").addEventListener("click", drawClt);
$("terms-run").addEventListener("click", showTerms);
drawBeta();
showTerms();
