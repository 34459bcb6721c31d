import init, { simulate, sweep, classify } from "./pkg/unilateral_wasm_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => parseFloat($(id).value);
const status = (msg) => { $("status").textContent = msg; };

function inputs() {
  return [$("maneuver").value, num("u1"), num("u2"), num("u12")];
}

// Line plot of several series sharing one x axis; `marks` are vertical lines.
function plot(canvas, x, series, marks = []) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 36;
  ctx.clearRect(0, 0, w, h);
  const ys = series.flatMap((s) => s.y.filter((v) => v !== null && Number.isFinite(v)));
  if (!ys.length) return;
  let [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  if (y0 === y1) { y0 -= 1; y1 += 1; }
  const [x0, x1] = [x[0], x[x.length - 1]];
  const px = (v) => pad + ((v - x0) / (x1 - x0 || 1)) * (w - 2 * pad);
  const py = (v) => h - pad - ((v - y0) / (y1 - y0)) * (h - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#333";
  ctx.fillText(y1.toPrecision(3), 2, pad);
  ctx.fillText(y0.toPrecision(3), 2, h - pad);
  ctx.fillText(x0.toPrecision(3), pad, h - pad + 14);
  ctx.fillText(x1.toPrecision(3), w - pad - 30, h - pad + 14);
  for (const m of marks) {
    ctx.strokeStyle = m.color;
    ctx.beginPath();
    ctx.moveTo(px(m.x), pad);
    ctx.lineTo(px(m.x), h - pad);
    ctx.stroke();
  }
  series.forEach((s, k) => {
    ctx.strokeStyle = s.color;
    ctx.beginPath();
    let pen = false;
    s.y.forEach((v, i) => {
      if (v === null || !Number.isFinite(v)) { pen = false; return; }
      pen ? ctx.lineTo(px(x[i]), py(v)) : ctx.moveTo(px(x[i]), py(v));
      pen = true;
    });
    ctx.stroke();
    ctx.fillStyle = s.color;
    ctx.fillText(s.label, w - pad - 120, pad + 14 * (k + 1));
  });
}

function guarded(f) {
  return () => {
    status("");
    try { f(); } catch (e) { status(String(e.message || e)); }
  };
}

function runSim() {
  const [m, u1, u2, u12] = inputs();
  const r = JSON.parse(simulate(m, num("theta0"), u1, u2, u12));
  plot($("sim"), r.t, [
    { label: "θ (rad)", y: r.theta, color: "#c33" },
    { label: "z body (m)", y: r.z.map((z) => z - r.z[0]), color: "#36c" },
  ], r.events.map(([t]) => ({ x: t, color: "#ddd" })));
  $("events").textContent = r.events.map(([t, e]) => `${t.toFixed(5)}  ${e}`).join("\n")
    + `\nended by: ${r.terminated_by ?? "horizon"}`;
}

function runSweep() {
  const [m, u1, u2, u12] = inputs();
  const r = JSON.parse(sweep(m, u1, u2, u12, num("lo"), num("hi"), Math.round(num("count"))));
  plot($("curve"), r.theta0, [{ label: "terminal θ", y: r.theta_terminal, color: "#393" }]);
  $("classes").textContent = r.theta0.map((x, i) => `${x.toFixed(4)}  ${r.mode_sequence[i]}`).join("\n");
}

function runClassify() {
  const [m, u1, u2, u12] = inputs();
  const args = [m, u1, u2, u12, num("lo"), num("hi"), Math.round(num("count"))];
  const curve = JSON.parse(sweep(...args));
  const r = JSON.parse(classify(...args));
  const colors = { kink: "#e90", jump: "#c0c" };
  plot($("curve"), curve.theta0, [{ label: "terminal θ", y: curve.theta_terminal, color: "#393" }],
    r.irregular.map(([x, c]) => ({ x, color: colors[c] })));
  $("classes").textContent = r.irregular.length
    ? r.irregular.map(([x, c]) => `${c} at θ₀ = ${x}`).join("\n")
    : "smooth everywhere on this grid";
}

$("maneuver").addEventListener("change", () => {
  const liftoff = $("maneuver").value === "liftoff";
  $("u1").value = liftoff ? 1 : 5;
  $("u2").value = liftoff ? 15 : 2;
  $("theta0").value = liftoff ? 0.05 : 0.1;
});

await init();
$("run-sim").addEventListener("click", guarded(runSim));
$("run-sweep").addEventListener("click", guarded(runSweep));
$("run-classify").addEventListener("click", guarded(runClassify));
status("ready");
