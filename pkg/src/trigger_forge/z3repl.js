#!/usr/bin/env node
// SMT-LIB 2 read-eval-print loop over the z3-solver WASM build.
// Reads balanced s-expressions from stdin, evaluates each in one persistent
// Z3 context, writes responses to stdout. Exits on EOF or (exit).

"use strict";

function resolveZ3() {
  const path = require("path");
  const tried = [];
  const candidates = [];
  if (process.env.Z3_WASM_DIR) candidates.push(process.env.Z3_WASM_DIR);
  let dir = process.cwd();
  for (;;) {
    candidates.push(path.join(dir, "node_modules", "z3-solver"));
    const up = path.dirname(dir);
    if (up === dir) break;
    dir = up;
  }
  candidates.push("z3-solver");
  for (const cand of candidates) {
    try { return require(cand); } catch (e) { tried.push(cand); }
  }
  process.stderr.write("z3repl: cannot resolve z3-solver; tried " + tried.join(", ") + "\n");
  process.exit(3);
}

function splitCommands(buffer) {
  // Returns [complete commands, remainder]. Tracks strings, |symbols|, comments.
  const cmds = [];
  let depth = 0, start = 0, inStr = false, inSym = false, inComment = false;
  let sawToken = false;
  for (let i = 0; i < buffer.length; i++) {
    const c = buffer[i];
    if (inComment) { if (c === "\n") inComment = false; continue; }
    if (inStr) { if (c === '"') { if (buffer[i + 1] === '"') i++; else inStr = false; } continue; }
    if (inSym) { if (c === "|") inSym = false; continue; }
    if (c === ";") { inComment = true; continue; }
    if (c === '"') { inStr = true; sawToken = true; continue; }
    if (c === "|") { inSym = true; sawToken = true; continue; }
    if (c === "(") { depth++; sawToken = true; continue; }
    if (c === ")") {
      depth--;
      if (depth === 0) { cmds.push(buffer.slice(start, i + 1)); start = i + 1; sawToken = false; }
      continue;
    }
  }
  return [cmds, buffer.slice(start)];
}

(async () => {
  const { init } = resolveZ3();
  const { Z3, em } = await init();
  const ctx = Z3.mk_context(Z3.mk_config());
  let pending = "";
  let queue = Promise.resolve();

  const log = process.env.Z3REPL_LOG
    ? require("fs").createWriteStream(process.env.Z3REPL_LOG, { flags: "a" })
    : null;
  // The async binding marshals the input string into WASM heap space that can
  // coincide with the buffer just freed for the previous call's output; under
  // pthreads the worker may then read stale bytes. Padding every command past
  // the largest output seen forces a different allocation size class.
  let maxOutputLen = 0;
  const evalCmd = async (cmd) => {
    if (/^\(\s*exit\s*\)$/.test(cmd.trim())) {
      em.PThread.terminateAllThreads();
      process.exit(0);
    }
    let input = cmd;
    if (input.length <= maxOutputLen) {
      input = input + "\n" + ";".repeat(maxOutputLen - input.length + 1);
    }
    let out;
    try {
      out = await Z3.eval_smtlib2_string(ctx, input);
    } catch (e) {
      out = '(error "' + String(e).replace(/"/g, "'") + '")';
    }
    maxOutputLen = Math.max(maxOutputLen, String(out || "").length);
    if (log) log.write("CMD<<" + cmd + ">>\nOUT<<" + (out || "") + ">>\n");
    if (out && out.trim().length > 0) process.stdout.write(out.endsWith("\n") ? out : out + "\n");
  };

  process.stdin.setEncoding("utf8");
  process.stdin.on("data", (chunk) => {
    pending += chunk;
    const [cmds, rest] = splitCommands(pending);
    pending = rest;
    for (const cmd of cmds) queue = queue.then(() => evalCmd(cmd));
  });
  process.stdin.on("end", () => {
    queue.then(() => { em.PThread.terminateAllThreads(); process.exit(0); });
  });
})();
