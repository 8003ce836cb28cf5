#!/usr/bin/env python3
"""Solve an LP file with HiGHS and write a `pra` solution file.

usage: highs_adapter.py MODEL.lp SOLUTION.sol [TIME_LIMIT_SECONDS|inf]
"""
import math
import sys

import highspy


def main(argv):
    if len(argv) not in (3, 4):
        print(__doc__.strip(), file=sys.stderr)
        return 2
    model_path, solution_path = argv[1], argv[2]
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("threads", 1)
    if len(argv) == 4 and argv[3] not in ("inf", ""):
        limit = float(argv[3])
        if math.isfinite(limit):
            h.setOptionValue("time_limit", limit)
    if h.readModel(model_path) != highspy.HighsStatus.kOk:
        print(f"cannot read {model_path}", file=sys.stderr)
        return 1
    h.run()
    status = h.getModelStatus()
    ms = highspy.HighsModelStatus
    has_values = h.getInfo().primal_solution_status == 2
    if status == ms.kOptimal:
        head = "optimal"
    elif status == ms.kInfeasible:
        head, has_values = "infeasible", False
    elif status in (ms.kTimeLimit, ms.kIterationLimit, ms.kSolutionLimit, ms.kInterrupt):
        head = "timelimit"
    else:
        print(f"unexpected HiGHS status {h.modelStatusToString(status)}", file=sys.stderr)
        return 1
    lines = [f"STATUS {head}"]
    if has_values:
        names = h.getLp().col_names_
        values = h.getSolution().col_value
        lines += [f"{n} {int(round(v))}" for n, v in zip(names, values)]
    with open(solution_path, "w") as f:
        f.write("\n".join(lines) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
