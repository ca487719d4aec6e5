"""Driver for an external SMT solver speaking SMT-LIB 2 over stdin/stdout.

Sessions are single-owner. Every query sets a solver-side timeout and is also
guarded by a watchdog that kills the process at roughly twice the limit.
Command resolution order: the TRIGGER_FORGE_SOLVER environment variable, a
native `z3` on PATH, then the bundled Node wrapper around the z3-solver WASM
build.
"""

from __future__ import annotations

import os
import queue
import shlex
import shutil
import subprocess
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import ProtocolError, SolverCrashed, SolverUnavailable
from .smtlib import Token, read_sexprs
from .terms import Conjunct, Term
from . import printing

SAT = "sat"
UNSAT = "unsat"
UNKNOWN = "unknown"
TIMEOUT = "timeout"

_HANDSHAKE_DEADLINE_S = 60.0
_WATCHDOG_SLACK_S = 5.0

DEFAULT_SEEDS = {"sat.random_seed": 488, "smt.random_seed": 599, "nlsat.seed": 611}


def _find_wasm_wrapper() -> Optional[list[str]]:
    wrapper = Path(__file__).with_name("z3repl.js")
    if not wrapper.exists() or shutil.which("node") is None:
        return None
    candidates = []
    if os.environ.get("Z3_WASM_DIR"):
        candidates.append(Path(os.environ["Z3_WASM_DIR"]))
    for start in (Path.cwd(), wrapper.parent):
        for directory in [start, *start.parents]:
            candidates.append(directory / "node_modules" / "z3-solver")
    for cand in candidates:
        if cand.is_dir():
            return ["node", str(wrapper)]
    return None


def default_solver_command() -> list[str]:
    env = os.environ.get("TRIGGER_FORGE_SOLVER")
    if env:
        return shlex.split(env)
    if shutil.which("z3"):
        return ["z3", "-in", "-smt2"]
    wasm = _find_wasm_wrapper()
    if wasm:
        return wasm
    raise SolverUnavailable(
        "no SMT solver found: set TRIGGER_FORGE_SOLVER, put z3 on PATH, "
        "or `npm install z3-solver` next to the checkout")


@dataclass(frozen=True)
class ModelValue:
    kind: str  # "int" | "real" | "bool" | "opaque"
    value: object

    def key(self) -> tuple:
        return (self.kind, str(self.value))


@dataclass
class Model:
    values: dict[str, ModelValue] = field(default_factory=dict)
    partial: bool = False

    def equivalence_classes(self) -> dict[tuple, list[str]]:
        classes: dict[tuple, list[str]] = {}
        for name in sorted(self.values):
            classes.setdefault(self.values[name].key(), []).append(name)
        return classes

    def restriction_key(self, names: Iterable[str]) -> tuple:
        return tuple((n, self.values[n].key()) for n in sorted(names)
                     if n in self.values)


@dataclass
class SatResult:
    status: str
    model: Optional[Model] = None
    reason: str = ""


def _parse_value(sx) -> ModelValue:
    if isinstance(sx, Token):
        if sx.kind == "numeral":
            return ModelValue("int", int(sx.value))
        if sx.kind == "decimal":
            return ModelValue("real", Fraction(sx.value))
        if sx.value == "true":
            return ModelValue("bool", True)
        if sx.value == "false":
            return ModelValue("bool", False)
        return ModelValue("opaque", sx.value)
    if isinstance(sx, list) and sx and isinstance(sx[0], Token):
        head = sx[0].value
        if head == "-" and len(sx) == 2:
            inner = _parse_value(sx[1])
            if inner.kind in ("int", "real"):
                return ModelValue(inner.kind, -inner.value)
        if head == "/" and len(sx) == 3:
            num, den = _parse_value(sx[1]), _parse_value(sx[2])
            if num.kind in ("int", "real") and den.kind in ("int", "real"):
                return ModelValue("real", Fraction(num.value) / Fraction(den.value))
        if head == "as" and len(sx) == 3:
            return _parse_value(sx[1])
    return ModelValue("opaque", _render(sx))


def _render(sx) -> str:
    if isinstance(sx, Token):
        return sx.value
    return "(" + " ".join(_render(x) for x in sx) + ")"


def parse_model_text(text: str) -> Model:
    """Accepts both `(model (define-fun ...))` and bare define-fun lists."""
    model = Model()
    try:
        roots = read_sexprs(text)
    except Exception as exc:
        raise ProtocolError(f"unparseable model response: {exc}") from exc
    entries: list = []
    for root in roots:
        if isinstance(root, list):
            if root and isinstance(root[0], Token) and root[0].value == "model":
                entries.extend(root[1:])
            else:
                entries.extend(root)
    for entry in entries:
        if not (isinstance(entry, list) and len(entry) >= 5
                and isinstance(entry[0], Token) and entry[0].value == "define-fun"):
            continue
        name_tok, params = entry[1], entry[2]
        if not isinstance(name_tok, Token) or (isinstance(params, list) and params):
            continue  # only nullary assignments matter
        model.values[name_tok.value] = _parse_value(entry[4])
    return model


class SolverSession:
    """One solver process. Not shareable across threads; several sessions may
    run concurrently without interference."""

    def __init__(self, command: Optional[Sequence[str]] = None,
                 seeds: Optional[dict[str, int]] = None,
                 log_path: str = "", name: str = "session"):
        self.command = list(command) if command else default_solver_command()
        self.name = name
        self._log = open(log_path, "a", encoding="utf-8") if log_path else None
        self._lines: queue.Queue = queue.Queue()
        self._dead = False
        self._last_timeout_ms: Optional[int] = None
        self.supports_soft_assert = False
        try:
            self.process = subprocess.Popen(
                self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL, text=True, bufsize=1)
        except OSError as exc:
            raise SolverUnavailable(f"cannot spawn {self.command}: {exc}") from exc
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()
        self._handshake(seeds if seeds is not None else dict(DEFAULT_SEEDS))

    # -- transport ---------------------------------------------------------

    def _pump(self) -> None:
        try:
            for line in self.process.stdout:
                self._lines.put(line.rstrip("\n"))
        except ValueError:
            pass
        self._lines.put(None)

    def _write(self, text: str) -> None:
        if self._dead:
            raise SolverCrashed(f"{self.name}: solver process is gone")
        if self._log:
            self._log.write("> " + text + "\n")
            self._log.flush()
        try:
            self.process.stdin.write(text + "\n")
            self.process.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            self._dead = True
            raise SolverCrashed(f"{self.name}: write failed: {exc}") from exc

    def _read_line(self, deadline_s: float) -> str:
        while True:
            try:
                line = self._lines.get(timeout=deadline_s)
            except queue.Empty:
                self.kill()
                raise SolverCrashed(
                    f"{self.name}: no response within {deadline_s:.1f}s (killed)")
            if line is None:
                self._dead = True
                raise SolverCrashed(f"{self.name}: solver exited unexpectedly")
            if self._log:
                self._log.write("< " + line + "\n")
                self._log.flush()
            if line.startswith("WARNING") or not line.strip():
                continue
            return line

    def _read_sexpr(self, deadline_s: float) -> str:
        """Read one balanced s-expression, possibly spanning lines."""
        buf, depth = "", 0
        while True:
            line = self._read_line(deadline_s)
            stripped = line.split(";", 1)[0]
            buf += line + "\n"
            depth += stripped.count("(") - stripped.count(")")
            if depth <= 0 and buf.strip():
                return buf

    def command_ok(self, text: str, deadline_s: float = _HANDSHAKE_DEADLINE_S,
                   tolerate_error: bool = False) -> bool:
        """Send one command expecting `success`; returns False on (error ...)."""
        self._write(text)
        line = self._read_line(deadline_s)
        if line == "success":
            return True
        if line.startswith("(error"):
            if line.count("(") > line.count(")"):
                self._read_sexpr(deadline_s)
            if tolerate_error:
                return False
            raise ProtocolError(f"{self.name}: {line} for {text!r}")
        raise ProtocolError(f"{self.name}: unexpected response {line!r} to {text!r}")

    # -- setup -------------------------------------------------------------

    def _handshake(self, seeds: dict[str, int]) -> None:
        self.command_ok("(set-option :print-success true)")
        self.command_ok("(set-option :produce-models true)", tolerate_error=True)
        self.command_ok("(set-option :smt.auto_config false)", tolerate_error=True)
        self.command_ok("(set-option :smt.mbqi false)", tolerate_error=True)
        for key, value in sorted(seeds.items()):
            self.command_ok(f"(set-option :{key} {value})", tolerate_error=True)
        self.command_ok("(push 1)")
        self.supports_soft_assert = self.command_ok(
            "(assert-soft true)", tolerate_error=True)
        self.command_ok("(pop 1)")

    # -- primitive commands -------------------------------------------------

    def declare_raw(self, line: str) -> None:
        self.command_ok(line)

    def assert_text(self, text: str) -> None:
        self.command_ok(f"(assert {text})")

    def assert_term(self, term: Term) -> None:
        self.assert_text(printing.print_term(term))

    def assert_conjunct(self, conjunct: Conjunct) -> None:
        self.command_ok(printing.print_conjunct(conjunct))

    def push(self) -> None:
        self.command_ok("(push 1)")

    def pop(self) -> None:
        self.command_ok("(pop 1)")

    def set_timeout(self, timeout_s: float) -> None:
        ms = max(1, int(timeout_s * 1000))
        if ms != self._last_timeout_ms:
            self.command_ok(f"(set-option :timeout {ms})")
            self._last_timeout_ms = ms

    def check_sat(self, timeout_s: float, want_model: bool = False) -> SatResult:
        self.set_timeout(timeout_s)
        deadline = 2 * timeout_s + _WATCHDOG_SLACK_S
        self._write("(check-sat)")
        try:
            line = self._read_line(deadline)
        except SolverCrashed:
            return SatResult(TIMEOUT, reason="watchdog")
        if line.startswith("(error"):
            raise ProtocolError(f"{self.name}: {line}")
        if line == "timeout":
            return SatResult(TIMEOUT, reason="solver")
        if line not in (SAT, UNSAT, UNKNOWN):
            raise ProtocolError(f"{self.name}: unexpected check-sat answer {line!r}")
        status = line
        reason = ""
        if status == UNKNOWN:
            reason = self._reason_unknown(deadline)
            if reason in ("timeout", "canceled"):
                status = TIMEOUT
        result = SatResult(status, reason=reason)
        if want_model and status in (SAT, UNKNOWN):
            model = self._try_model(deadline)
            if model is not None:
                model.partial = status != SAT
                result.model = model
        return result

    def _reason_unknown(self, deadline_s: float) -> str:
        self._write("(get-info :reason-unknown)")
        text = self._read_sexpr(deadline_s)
        return "timeout" if "timeout" in text or "canceled" in text else text.strip()

    def get_values(self, names: list[str], deadline_s: float) -> Optional[Model]:
        """Fetch values for the given nullary symbols via get-value; returns
        None when the solver refuses (e.g. after unknown)."""
        if not names:
            return Model()
        from .printing import symbol
        joined = " ".join(symbol(n) for n in names)
        self._write(f"(get-value ({joined}))")
        text = self._read_sexpr(deadline_s)
        if text.lstrip().startswith("(error"):
            return None
        model = Model()
        try:
            roots = read_sexprs(text)
        except Exception as exc:
            raise ProtocolError(f"unparseable get-value response: {exc}") from exc
        for root in roots:
            if not isinstance(root, list):
                continue
            for pair in root:
                if isinstance(pair, list) and len(pair) == 2                         and isinstance(pair[0], Token):
                    model.values[pair[0].value] = _parse_value(pair[1])
        return model

    def _try_model(self, deadline_s: float) -> Optional[Model]:
        self._write("(get-model)")
        text = self._read_sexpr(deadline_s)
        if text.lstrip().startswith("(error"):
            return None
        return parse_model_text(text)

    def assert_diversity(self, constraint_text: str, soft: bool = True,
                         weight: int = 1) -> bool:
        """Assert a diversity constraint; soft when the solver supports it.
        Returns True when the soft form was used."""
        if soft and self.supports_soft_assert:
            suffix = f" :weight {weight}" if weight != 1 else ""
            self.command_ok(f"(assert-soft {constraint_text}{suffix})")
            return True
        self.assert_text(constraint_text)
        return False

    @property
    def dead(self) -> bool:
        return self._dead

    # -- lifecycle -----------------------------------------------------------

    def kill(self) -> None:
        self._dead = True
        try:
            self.process.kill()
        except OSError:
            pass

    def close(self) -> None:
        if not self._dead:
            try:
                self._write("(exit)")
            except SolverCrashed:
                pass
        try:
            self.process.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self.kill()
        self._dead = True
        if self._log:
            self._log.close()
            self._log = None

    def __enter__(self) -> "SolverSession":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def check_sat(session: SolverSession, assertions: Iterable[Term | Conjunct],
              timeout_s: float, want_model: bool = False) -> SatResult:
    """Assert a group of formulas in the session's current scope and check."""
    for item in assertions:
        if isinstance(item, Conjunct):
            session.assert_conjunct(item)
        else:
            session.assert_term(item)
    return session.check_sat(timeout_s, want_model)
