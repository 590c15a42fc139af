"""Command-line entry point.

Subcommands::

    fdnc sweep --config sweep.cfg --out ber.csv [--workers N]
    fdnc encode --Q 2 --bits-per-dim 1 < bits.txt > symbols.txt
    fdnc decode --Q 2 --bits-per-dim 1 < symbols.txt > bits.txt
    fdnc table1
    fdnc beams --config sweep.cfg [--seed S] [--trials K]

Exit status is 0 on success, 1 on bad input or configuration and 2 on
usage errors (argparse).
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Sequence, TextIO

import numpy as np

from .beamforming import FeasibleSetEmpty
from .constellation import (
    CubeSplitConfig,
    decode_greedy,
    decode_ml,
    format_bits,
    modulate,
    table,
)
from .mathcore import RandomStream, linear_to_db
from .simulator import LinkSetup, draw_batch_paths, emit_csv, load_config, run_sweep

__all__ = ["main", "format_table1"]


def _complex(z: complex) -> str:
    return f"{z.real:+.2f}{z.imag:+.2f}j"


def format_table1() -> str:
    """Text rendering of the ``Q=2, B=(1,1)`` constellation, two decimals."""
    lines = ["bits cell a1   a2   w1          t1          x1          x2"]
    for row in table(CubeSplitConfig.uniform(2, 1)):
        a = row["a"]
        lines.append(f"{row['bits']}  C{row['cell'] + 1}   {a[0]:.2f} {a[1]:.2f} "
                     f"{_complex(row['w'][0])} {_complex(row['t'][0])} "
                     f"{_complex(row['x'][0])} {_complex(row['x'][1])}")
    return "\n".join(lines) + "\n"


def _read_bits(fh: TextIO, hex_input: bool) -> np.ndarray:
    text = "".join(fh.read().split())
    if hex_input:
        try:
            text = "".join(f"{int(c, 16):04b}" for c in text)
        except ValueError as exc:
            raise ValueError("input is not valid hexadecimal") from exc
    if set(text) - {"0", "1"}:
        raise ValueError("bit input may contain only 0, 1 and whitespace")
    return np.array([int(c) for c in text], dtype=np.uint8)


def _cmd_encode(args, stdin: TextIO, stdout: TextIO) -> int:
    cfg = CubeSplitConfig.uniform(args.Q, args.bits_per_dim)
    bits = _read_bits(stdin, args.hex)
    nb = cfg.bits_per_block
    if bits.size % nb:
        raise ValueError(f"{bits.size} bits is not a multiple of the block size {nb}")
    for x in modulate(bits.reshape(-1, nb), cfg):
        stdout.write(" ".join(f"{float(v.real)!r} {float(v.imag)!r}" for v in x) + "\n")
    return 0


def _cmd_decode(args, stdin: TextIO, stdout: TextIO) -> int:
    cfg = CubeSplitConfig.uniform(args.Q, args.bits_per_dim)
    rows = []
    for lineno, line in enumerate(stdin, 1):
        if not line.strip():
            continue
        try:
            vals = [float(v) for v in line.split()]
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc
        if len(vals) != 2 * cfg.Q:
            raise ValueError(f"line {lineno}: expected {2 * cfg.Q} numbers (re im pairs), got {len(vals)}")
        rows.append(vals)
    if not rows:
        return 0
    v = np.array(rows)
    y = v[:, 0::2] + 1j * v[:, 1::2]
    bits = decode_ml(y, cfg) if args.decoder == "ml" else decode_greedy(y, cfg)
    for b in bits:
        stdout.write(format_bits(b) + "\n")
    return 0


def _cmd_sweep(args, stdin, stdout) -> int:
    cfg = load_config(args.config)
    records = run_sweep(cfg, workers=args.workers)
    emit_csv(records, args.out)
    return 0


def _cmd_table1(args, stdin, stdout: TextIO) -> int:
    stdout.write(format_table1())
    return 0


def _deg(cosine) -> np.ndarray:
    return np.degrees(np.arccos(cosine))


def _cmd_beams(args, stdin, stdout: TextIO) -> int:
    cfg = load_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    paths = draw_batch_paths(cfg, RandomStream(seed, 0).generator(), args.trials)
    stdout.write("M iso_db trial aod1 aoa1 aod2 aoa2 h12_db h21_db si1_db si2_db\n")
    for n in cfg.array_sizes:
        try:
            setup = LinkSetup(cfg, n)
        except FeasibleSetEmpty as exc:
            stdout.write(f"{n} infeasible: {exc}\n")
            continue
        tx1, rx1, tx2, rx2 = setup.beams(paths)
        angles = [_deg(setup.tx_grid[tx1]), _deg(setup.rx_grid[rx1]),
                  _deg(setup.tx_grid[tx2]), _deg(setup.rx_grid[rx2])]
        for iso, eff in setup.effective(paths).items():
            gains = [linear_to_db(np.abs(h) ** 2) for h in (eff.h12, eff.h21, eff.si1, eff.si2)]
            for k in range(args.trials):
                cols = [f"{a[k]:.2f}" for a in angles] + [f"{g[k]:.2f}" for g in gains]
                stdout.write(f"{n} {iso:g} {k} " + " ".join(cols) + "\n")
    return 0


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fdnc", description="Full-duplex non-coherent link simulator")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sweep", help="run a BER sweep and write CSV")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--workers", type=_positive_int, default=None,
                   help="worker processes (default: $FDNC_WORKERS or the config value)")
    s.set_defaults(func=_cmd_sweep)

    for name, func, helptext in (("encode", _cmd_encode, "bits on stdin to symbols on stdout"),
                                 ("decode", _cmd_decode, "symbols on stdin to bits on stdout")):
        c = sub.add_parser(name, help=helptext)
        c.add_argument("--Q", type=int, default=2)
        c.add_argument("--bits-per-dim", type=_positive_int, default=1)
        if name == "encode":
            c.add_argument("--hex", action="store_true", help="read hexadecimal instead of 0/1 text")
        else:
            c.add_argument("--decoder", choices=("greedy", "ml"), default="greedy")
        c.set_defaults(func=func)

    t = sub.add_parser("table1", help="print the Q=2, B=(1,1) constellation")
    t.set_defaults(func=_cmd_table1)

    b = sub.add_parser("beams", help="print selected beam angles and effective gains")
    b.add_argument("--config", required=True)
    b.add_argument("--seed", type=int, default=None)
    b.add_argument("--trials", type=_positive_int, default=1)
    b.set_defaults(func=_cmd_beams)
    return p


def main(argv: Sequence[str] | None = None, stdin: TextIO | None = None,
         stdout: TextIO | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, stdin or sys.stdin, stdout or sys.stdout)
    except (ValueError, OSError, FeasibleSetEmpty) as exc:
        print(f"fdnc {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
