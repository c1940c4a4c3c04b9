// Minimal page runtime: turns cell placeholders into editors and talks to
// the /eval and /check endpoints (protocol version 1).
(function () {
  "use strict";

  function banner(text) {
    var div = document.createElement("div");
    div.className = "ald-banner";
    div.textContent = text;
    document.body.insertBefore(div, document.body.firstChild);
  }

  function post(path, body) {
    return fetch(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body)
    }).then(function (r) { return r.json(); });
  }

  function mount() {
    var node = document.getElementById("ald-manifest");
    var manifest;
    try {
      manifest = JSON.parse(node.textContent);
    } catch (e) {
      banner("Interactive cells are unavailable: missing or invalid manifest.");
      return;
    }
    var editors = {};
    var order = [];
    manifest.cells.forEach(function (cell) {
      var div = document.querySelector('[data-cell-id="' + cell.cell_id + '"]');
      if (!div || cell.kind === "static") return;
      var area = document.createElement("textarea");
      area.value = cell.initial_text;
      area.rows = Math.max(2, cell.initial_text.split("\n").length);
      div.replaceChildren(area);
      editors[cell.cell_id] = area;
      order.push(cell);
      var out = document.createElement("div");
      out.className = "ald-result";
      if (cell.kind === "query") addRun(div, cell, area, out, order.length - 1);
      if (cell.kind === "exercise") addCheck(div, cell, area, out);
      div.appendChild(out);
    });

    function programFor(index) {
      for (var i = index - 1; i >= 0; i--) {
        if (order[i].kind === "program" || order[i].kind === "exercise") return editors[order[i].cell_id].value;
      }
      return "";
    }

    function addRun(div, cell, area, out, index) {
      var answers = 1;
      var run = button("Run");
      var next = button("Next");
      next.disabled = true;
      function go() {
        run.disabled = next.disabled = true;
        post("/eval", {
          engine_id: cell.engine_id,
          program: programFor(index),
          query: area.value,
          max_answers: answers
        }).then(function (r) {
          run.disabled = false;
          if (r.status !== "ok") {
            out.className = "ald-result error";
            out.textContent = r.error;
            return;
          }
          out.className = "ald-result";
          out.textContent = r.answers.length === 0 ? "no" : r.answers.map(function (a) {
            var names = Object.keys(a.bindings);
            return names.length === 0 ? "yes" : names.map(function (n) { return n + " = " + a.bindings[n]; }).join("\n");
          }).join("\n;\n");
          next.disabled = !r.more;
        }, function () {
          run.disabled = false;
          out.className = "ald-result error";
          out.textContent = "Request failed; try again.";
        });
      }
      run.onclick = function () { answers = 1; go(); };
      next.onclick = function () { answers += 1; go(); };
      div.appendChild(run);
      div.appendChild(next);
    }

    function addCheck(div, cell, area, out) {
      var check = button("Check");
      check.onclick = function () {
        check.disabled = true;
        post("/check", { page: manifest.page, cell_id: cell.cell_id, submission: area.value }).then(function (r) {
          check.disabled = false;
          out.className = "ald-result " + (r.verdict || "error");
          out.textContent = r.feedback || r.error;
        }, function () {
          check.disabled = false;
          out.className = "ald-result error";
          out.textContent = "Request failed; try again.";
        });
      };
      div.appendChild(check);
    }
  }

  function button(label) {
    var b = document.createElement("button");
    b.type = "button";
    b.textContent = label;
    return b;
  }

  if (document.readyState === "loading") document.addEventListener("DOMContentLoaded", mount);
  else mount();
})();
