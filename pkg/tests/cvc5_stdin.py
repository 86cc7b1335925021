"""Run an SMT-LIB script from stdin through the cvc5 Python bindings.

Used as a second, independent solver command in the conformance tests.
"""

import sys

import cvc5

tm = cvc5.TermManager()
solver = cvc5.Solver(tm)
solver.setOption("incremental", "true")
parser = cvc5.InputParser(solver)
parser.setStringInput(cvc5.InputLanguage.SMT_LIB_2_6, sys.stdin.read(), "stdin")
sm = parser.getSymbolManager()
while True:
    cmd = parser.nextCommand()
    if cmd.isNull():
        break
    out = cmd.invoke(solver, sm)
    if out:
        sys.stdout.write(out if out.endswith("\n") else out + "\n")
sys.stdout.flush()
