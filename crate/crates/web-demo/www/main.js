import init, { demo_items, score_demo, reliability, shape } from "./pkg/synthpersona_web.js";

const $ = (id) => document.getElementById(id);
const DOMAINS = ["EXT", "AGR", "CON", "NEU", "OPE"];

function escape(s) {
  return String(s).replace(/[&<>"]/g, (c) => ({ "&": "&amp;", "<": "&lt;", ">": "&gt;", '"': "&quot;" })[c]);
}

function show(target, render) {
  try {
    $(target).innerHTML = render();
  } catch (e) {
    $(target).innerHTML = `<p class="error">${escape(e)}</p>`;
  }
}

function bar(score, lo = 1, hi = 5) {
  const width = ((score - lo) / (hi - lo)) * 12;
  return `<span class="bar" style="width:${width.toFixed(2)}rem"></span> ${score.toFixed(2)}`;
}

function buildItems() {
  const { options, items } = JSON.parse(demo_items());
  const choices = options.map((o) => `<option value="${o.value}">${o.value} ${escape(o.label)}</option>`).join("");
  $("items").innerHTML = items
    .map(
      (it, i) =>
        `<div class="item"><select data-index="${i}">${choices}</select>` +
        `${escape(it.text)} <small>(${it.subscale}${it.reversed ? ", reversed" : ""})</small></div>`,
    )
    .join("");
  for (const s of $("items").querySelectorAll("select")) s.value = "3";
}

function scoreDemo() {
  const answers = [...$("items").querySelectorAll("select")].map((s) => s.value).join(",");
  show("score-out", () => {
    const { subscales } = JSON.parse(score_demo(answers));
    const rows = subscales.map((s) => `<tr><td>${escape(s.name)}</td><td>${bar(s.score)}</td><td>${s.items} items</td></tr>`);
    return `<table>${rows.join("")}</table>`;
  });
}

function computeReliability() {
  show("reliability-out", () => {
    const { report, bands } = JSON.parse(reliability($("matrix").value));
    const fmt = (v) => (v === null ? "NA" : v.toFixed(3));
    const dropped = report.dropped.length ? `<p>Dropped for zero variance: ${report.dropped.map(escape).join(", ")}</p>` : "";
    return (
      `<table><tr><th></th><th>value</th><th>band</th></tr>` +
      `<tr><td>α</td><td>${fmt(report.alpha)}</td><td>${bands.alpha}</td></tr>` +
      `<tr><td>λ6</td><td>${fmt(report.lambda6)}${report.lambda6_degraded ? " (pseudo-inverse)" : ""}</td><td>${bands.lambda6}</td></tr>` +
      `<tr><td>ω</td><td>${fmt(report.omega)}${report.omega_heywood ? " (Heywood)" : ""}</td><td>${bands.omega}</td></tr>` +
      `</table><p>Overall: ${escape(bands.overall)} (n = ${report.n}, k = ${report.k})</p>${dropped}`
    );
  });
}

function buildMultiControls() {
  $("multi-controls").innerHTML = DOMAINS.map(
    (d, i) => `${d} <select data-domain="${i}"><option value="1">low</option><option value="9">high</option></select>`,
  ).join(" ");
}

function shapingCode() {
  if ($("mode").value === "multi") {
    return [...$("multi-controls").querySelectorAll("select")].map((s) => s.value).join("");
  }
  const digits = ["0", "0", "0", "0", "0"];
  digits[Number($("domain").value)] = $("level").value;
  return digits.join("");
}

function simulate() {
  show("shape-out", () => {
    const out = JSON.parse(shape(shapingCode(), Number($("sigma").value), Number($("seed").value)));
    const rows = out.scores.map(
      (s) => `<tr><td>${escape(s.name)}</td><td>${s.level ?? "not prompted"}</td><td>${bar(s.score)}</td></tr>`,
    );
    return (
      `<h3>Persona</h3><pre>${escape(out.persona)}</pre>` +
      `<h3>First survey prompt</h3><pre>${escape(out.prompt)}</pre>` +
      `<h3>Simulated IPIP-NEO scores</h3><table><tr><th>domain</th><th>target level</th><th>score</th></tr>${rows.join("")}</table>`
    );
  });
}

await init();
buildItems();
buildMultiControls();
$("score").addEventListener("click", scoreDemo);
$("reliability").addEventListener("click", computeReliability);
$("shape").addEventListener("click", simulate);
$("level").addEventListener("input", () => ($("level-value").textContent = $("level").value));
$("mode").addEventListener("change", () => {
  const multi = $("mode").value === "multi";
  $("multi-controls").hidden = !multi;
  $("single-controls").hidden = multi;
});
