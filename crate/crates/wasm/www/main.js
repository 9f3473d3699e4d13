import init, { sweep, solveWithObstacle, playTrial } from "./pkg/advplan_wasm.js";

const WORLD = 20;
const $ = (id) => document.getElementById(id);

function toCanvas(canvas, x, y) {
  const s = canvas.width / WORLD;
  return [x * s, canvas.height - y * s];
}

function circle(ctx, canvas, x, y, r, style, fill = true) {
  const [cx, cy] = toCanvas(canvas, x, y);
  ctx.beginPath();
  ctx.arc(cx, cy, r * canvas.width / WORLD, 0, 2 * Math.PI);
  if (fill) { ctx.fillStyle = style; ctx.fill(); } else { ctx.strokeStyle = style; ctx.stroke(); }
}

function polyline(ctx, canvas, xy, style, width = 2) {
  ctx.beginPath();
  for (let i = 0; i < xy.length; i += 2) {
    const [px, py] = toCanvas(canvas, xy[i], xy[i + 1]);
    i === 0 ? ctx.moveTo(px, py) : ctx.lineTo(px, py);
  }
  ctx.strokeStyle = style;
  ctx.lineWidth = width;
  ctx.stroke();
  ctx.lineWidth = 1;
}

function heat(t) {
  const h = 240 - 240 * Math.min(Math.max(t, 0), 1);
  return `hsl(${h}, 80%, 55%)`;
}

let current = null;

function drawSweep() {
  const canvas = $("sweep");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (!current) return;
  const g = current.grid;
  const layer = $("layer").value;
  const values = layer === "kappa" ? Array.from(current.kappa, (k) => Math.log10(k)) : Array.from(current.iterations);
  const finite = values.filter(Number.isFinite);
  const lo = Math.min(...finite);
  const hi = Math.max(...finite);
  const failed = current.failed();
  const cell = canvas.width / g;
  for (let row = 0; row < g; row++) {
    for (let col = 0; col < g; col++) {
      const i = row * g + col;
      ctx.fillStyle = failed[i] ? "#000" : heat(hi > lo ? (values[i] - lo) / (hi - lo) : 0);
      ctx.fillRect(col * cell, canvas.height - (row + 1) * cell, cell + 0.5, cell + 0.5);
    }
  }
  polyline(ctx, canvas, [0, current.corridorY, WORLD, current.corridorY], "rgba(255,255,255,.7)", 1);
  $("sweep-info").textContent =
    `${layer} range ${lo.toFixed(2)} to ${hi.toFixed(2)}\nobstacle-free condition number ${current.freeKappa.toExponential(3)}`;
}

function runSweep() {
  const grid = Number($("grid").value);
  const radius = Number($("radius").value);
  $("sweep-info").textContent = "solving...";
  setTimeout(() => {
    try {
      const g = sweep(grid, radius, $("sweep-conservative").checked);
      current = { grid: g.grid, kappa: g.kappa(), iterations: g.iterations(), failed: () => g.failed(), freeKappa: g.freeKappa, corridorY: g.corridorY };
      g.free();
      drawSweep();
    } catch (e) {
      $("sweep-info").textContent = String(e);
    }
  }, 10);
}

function solveAt(event) {
  if (!current) return;
  const canvas = $("sweep");
  const rect = canvas.getBoundingClientRect();
  const g = current.grid;
  const col = Math.floor((event.clientX - rect.left) / rect.width * g);
  const row = Math.floor((rect.bottom - event.clientY) / rect.height * g);
  const x = (col + 0.5) * WORLD / g;
  const y = (row + 0.5) * WORLD / g;
  const radius = Number($("radius").value);
  drawSweep();
  try {
    const s = solveWithObstacle(x, y, radius, g, $("sweep-conservative").checked);
    const ctx = canvas.getContext("2d");
    circle(ctx, canvas, x, y, radius, "#fff", false);
    polyline(ctx, canvas, s.path(), "#fff");
    $("sweep-info").textContent =
      `obstacle (${x.toFixed(2)}, ${y.toFixed(2)})\n` +
      `${s.iterations} iterations, ${s.converged ? "converged" : "not converged"}, ` +
      `condition number ${s.kappa.toExponential(3)}\npath clearance ${s.clearance.toFixed(3)} m`;
    s.free();
  } catch (e) {
    $("sweep-info").textContent = String(e);
  }
}

let animation = null;

function runTrial() {
  if (animation) cancelAnimationFrame(animation);
  let p;
  try {
    p = playTrial(BigInt($("seed").value), $("policy").value, $("trial-conservative").checked);
  } catch (e) {
    $("trial-info").textContent = String(e);
    return;
  }
  const trial = { outcome: p.outcome, obstacles: p.obstacles(), target: p.target(), adversary: p.adversary(), iterations: p.iterations(), goal: p.goal() };
  p.free();
  const canvas = $("trial");
  const ctx = canvas.getContext("2d");
  const steps = trial.iterations.length;
  let step = 0;
  let last = 0;
  const frame = (now) => {
    if (now - last > 60) {
      last = now;
      ctx.clearRect(0, 0, canvas.width, canvas.height);
      for (let i = 0; i < trial.obstacles.length; i += 3) {
        circle(ctx, canvas, trial.obstacles[i], trial.obstacles[i + 1], trial.obstacles[i + 2], "#777");
      }
      circle(ctx, canvas, trial.goal[0], trial.goal[1], trial.goal[2], "#1a7f37");
      polyline(ctx, canvas, trial.target.slice(0, 2 * (step + 1)), "#0a58ca");
      const [tx, ty] = [trial.target[2 * step], trial.target[2 * step + 1]];
      circle(ctx, canvas, tx, ty, 0.25, "#0a58ca");
      if (trial.adversary.length && step > 0) {
        circle(ctx, canvas, trial.adversary[2 * (step - 1)], trial.adversary[2 * step - 1], 0.3, "#d63384");
      }
      const its = step > 0 ? trial.iterations[step - 1] : 0;
      $("trial-info").textContent = `step ${step} / ${steps}, replan iterations ${its}` +
        (step === steps ? `\noutcome: ${trial.outcome}` : "");
      step++;
    }
    if (step <= steps) animation = requestAnimationFrame(frame);
  };
  animation = requestAnimationFrame(frame);
}

await init();
$("run-sweep").addEventListener("click", runSweep);
$("layer").addEventListener("change", drawSweep);
$("sweep").addEventListener("click", solveAt);
$("run-trial").addEventListener("click", runTrial);
runSweep();
