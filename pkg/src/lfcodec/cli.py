"""``lfcodec`` command line.

Every flag may also be set from a JSON config file (``--config``) using the
flag name with underscores; config values take precedence over flags.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from .codec.bitstream import LfBitstream
from .codec.sequence import CodecConfig
from .enhance.qenet import QeNet
from .enhance.rvs import POLICIES
from .enhance.training import QeConfig, build_qe_dataset, train_qenet, write_quality_report
from .errors import LfError
from .lightfield import load_lightfield, save_lightfield
from .metrics import (RD_FIELDS, bd_quality, bd_rate, fluctuation, per_view_quality,
                      read_rd_csv, write_rd_csv, write_rows)
from .pipeline import (CONFIGURATIONS, decode_lf, encode_lf, make_synthesizer, rd_sweep)
from .rdo import RdoConfig, write_decisions
from .structure import build_sequence
from .synthesis.d2gan import build_synth_dataset, train_d2gan
from .synthesis.networks import D2GanConfig, load_models, save_models
from .synthetic import occlusion_scene, textured_plane

log = logging.getLogger("lfcodec")


def _qps(text: str) -> List[int]:
    return [int(t) for t in str(text).split(",") if t.strip()]


def _load_synth(path: Optional[str]):
    if not path:
        return None
    gen, _ = load_models(path)
    return make_synthesizer(gen, D2GanConfig(n_levels=gen.n_levels))


def _load_qe(path: Optional[str], enhance: bool = True):
    return QeNet.load(path) if (path and enhance) else None


def _codec(args) -> CodecConfig:
    return CodecConfig(base_qp=args.qp, codec_id=args.codec, ext_cmd=args.ext_cmd, jobs=args.jobs)


# --- subcommands ---------------------------------------------------------------

def cmd_gen_synthetic(args) -> int:
    if args.kind == "plane":
        lf = textured_plane(args.grid, args.grid, args.size, args.size, args.disparity,
                            seed=args.seed, gray=args.gray)
    else:
        lf = occlusion_scene(args.grid, args.grid, args.size, args.size, 0.0, args.disparity,
                             seed=args.seed)
    path = save_lightfield(lf, args.out, extra={"kind": args.kind, "disparity": args.disparity})
    print(path)
    return 0


def cmd_encode(args) -> int:
    lf = load_lightfield(args.manifest)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    res = encode_lf(lf, _codec(args), _load_synth(args.synth_model),
                    RdoConfig(args.lam, args.qp_lambda),
                    workdir=str(out.parent))
    res.stream.write(out)
    if res.decisions:
        seq, _ = build_sequence(lf.grid_rows, lf.grid_cols)
        write_decisions(out.with_suffix(".rdo.csv"), res.decisions, seq)
    print(f"{res.bpp:.6f} bpp, {len(res.stream.records)} views in stream")
    return 0


def cmd_decode(args) -> int:
    stream = LfBitstream.read(args.bitstream)
    original = load_lightfield(args.original) if args.original else None
    res = decode_lf(stream, _load_synth(args.synth_model),
                    _load_qe(args.qe_model, not args.no_enhance), POLICIES[args.rvs],
                    original=original)
    out = Path(args.out)
    save_lightfield(res.lightfield, out,
                    extra={"synthesized": [list(p) for p in res.synthesized]})
    if original is not None:
        seq, _ = build_sequence(stream.header.grid_rows, stream.header.grid_cols)
        rows = per_view_quality(res.lightfield, original, seq, with_ssim=False)
        before = fluctuation(res.before_enhancement, original, seq)
        for r, b in zip(rows, before.psnr):
            r["psnr_before_enhancement"] = b
        write_rows(out / "per_view.csv", rows)
        if res.quality_rows:
            write_quality_report(out / "enhancement.csv", res.quality_rows)
        from .plotting import plot_fluctuation
        plot_fluctuation({"decoded": before.psnr,
                          "enhanced": [r["psnr_db"] for r in rows]}, out / "fluctuation.png")
    print(f"decoded {len(stream.records)} views, synthesized {len(res.synthesized)}")
    return 0


def cmd_train_synth(args) -> int:
    lfs = [load_lightfield(m) for m in args.manifests]
    cfg = D2GanConfig(batch_size=args.batch, lr=args.lr, lr_min=args.lr_min, gamma=args.gamma,
                      val_every=args.val_every, warmup_steps=args.warmup,
                      freeze_disparity=args.freeze_disparity)
    ds = build_synth_dataset(lfs, cfg)
    val = build_synth_dataset([load_lightfield(args.val)], cfg) if args.val else None
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    gen, disc, rows = train_d2gan(ds, cfg, seed=args.seed, steps=args.steps, val_dataset=val,
                                  log_path=out.with_suffix(".log.csv"))
    save_models(out, gen, disc)
    print(f"{out}: {len(rows)} steps, final mse {rows[-1]['L_mse']:.6f}")
    return 0


def cmd_train_qe(args) -> int:
    lfs = [load_lightfield(m) for m in args.manifests]
    synth = _load_synth(args.synth_model)
    pairs = []
    for lf in lfs:
        for qp in _qps(args.train_qps):
            enc = encode_lf(lf, CodecConfig(base_qp=qp, jobs=args.jobs), synth,
                            RdoConfig(args.lam, args.qp_lambda))
            pairs.append((decode_lf(enc.stream, synth).lightfield, lf))
    seq, _ = build_sequence(lfs[0].grid_rows, lfs[0].grid_cols)
    cfg = QeConfig(lr=args.lr, batch_size=args.batch, patch=args.patch, stride=args.patch // 2,
                   steps=args.steps, lr_min=args.lr_min)
    ds = build_qe_dataset(pairs, seq, cfg.patch, cfg.stride)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    model, rows = train_qenet(ds, cfg, seed=args.seed, log_path=out.with_suffix(".log.csv"))
    model.save(out)
    print(f"{out}: {len(ds)} patches, final loss {rows[-1]['train_loss']:.6f}")
    return 0


def cmd_eval(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.original and args.reconstructed:
        orig = load_lightfield(args.original)
        rec = load_lightfield(args.reconstructed)
        seq, _ = build_sequence(orig.grid_rows, orig.grid_cols)
        rows = per_view_quality(rec, orig, seq)
        write_rows(out / "metrics.csv", rows)
        stats = fluctuation(rec, orig, seq)
        print(f"mean PSNR {stats.mean:.3f} dB, std {stats.std:.3f}, min {stats.min:.3f}")
    if args.rd:
        curves = {Path(p).stem: p for p in args.rd}
        anchor = args.anchor or next(iter(curves))
        _bd_report(curves, anchor, out)
    return 0


def _bd_report(curves, anchor: str, out: Path):
    from .plotting import plot_rd

    loaded = {n: read_rd_csv(p, label=n) for n, p in curves.items()}
    rows = []
    for name, c in loaded.items():
        if name == anchor:
            continue
        row = {"anchor": anchor, "test": name,
               "bd_rate_pct": bd_rate(loaded[anchor], c), "bd_psnr_db": bd_quality(loaded[anchor], c)}
        try:
            row["bd_rate_ssim_pct"] = bd_rate(read_rd_csv(curves[anchor], "ssim"),
                                              read_rd_csv(curves[name], "ssim"))
        except (KeyError, ValueError):
            row["bd_rate_ssim_pct"] = float("nan")
        rows.append(row)
        print(f"{name} vs {anchor}: BD-BR {row['bd_rate_pct']:+.2f}% "
              f"BD-PSNR {row['bd_psnr_db']:+.3f} dB")
    write_rows(out / "bd.csv", rows,
               ["anchor", "test", "bd_rate_pct", "bd_psnr_db", "bd_rate_ssim_pct"])
    plot_rd(list(loaded.values()), out / "rd_curve.png")


def cmd_rd_sweep(args) -> int:
    from .plotting import plot_fluctuation

    lf = load_lightfield(args.manifest)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    synth = _load_synth(args.synth_model)
    configs = [c for c in args.configs.split(",") if c]
    if synth is None:
        configs = [c for c in configs if c != "proposed"]
    qps = _qps(args.qps)
    res = rd_sweep(lf, qps, synth, _load_qe(args.qe_model, not args.no_enhance),
                   RdoConfig(args.lam, args.qp_lambda), configs, args.jobs)
    paths = {}
    for name, rows in res.rows.items():
        paths[name] = out / f"{name}.csv"
        write_rd_csv(paths[name], rows, RD_FIELDS)
    anchor = args.anchor if args.anchor in paths else next(iter(paths))
    _bd_report(paths, anchor, out)
    mid = qps[len(qps) // 2]
    plot_fluctuation({n: res.per_view[(n, mid)] for n in res.rows}, out / "fluctuation.png",
                     title=f"per-view PSNR at QP {mid}")
    return 0


# --- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lfcodec", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="JSON file whose keys override flags")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, qp=True):
        if qp:
            sp.add_argument("--qp", type=int, default=28)
        sp.add_argument("--lambda", dest="lam", type=float, default=0.1)
        sp.add_argument("--qp-lambda", dest="qp_lambda", action="store_true",
                        help="derive lambda from each view's QP instead of --lambda")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--jobs", type=int, default=1)
        sp.add_argument("--out", required=True)

    g = sub.add_parser("gen-synthetic", help="write a synthetic light field")
    g.add_argument("--kind", choices=("plane", "occlusion"), default="plane")
    g.add_argument("--disparity", type=float, default=1.0)
    g.add_argument("--size", type=int, default=64)
    g.add_argument("--grid", type=int, default=8)
    g.add_argument("--gray", action="store_true")
    common(g, qp=False)
    g.set_defaults(func=cmd_gen_synthetic)

    e = sub.add_parser("encode", help="encode a light field")
    e.add_argument("manifest")
    e.add_argument("--codec", choices=("builtin", "external"), default="builtin")
    e.add_argument("--ext-cmd", dest="ext_cmd")
    e.add_argument("--synth-model", dest="synth_model")
    common(e)
    e.set_defaults(func=cmd_encode)

    d = sub.add_parser("decode", help="decode, synthesize dropped views and enhance")
    d.add_argument("bitstream")
    d.add_argument("--synth-model", dest="synth_model")
    d.add_argument("--qe-model", dest="qe_model")
    d.add_argument("--no-enhance", dest="no_enhance", action="store_true")
    d.add_argument("--rvs", choices=sorted(POLICIES), default="sharpness")
    d.add_argument("--original", help="manifest of the source for per-view reports")
    common(d, qp=False)
    d.set_defaults(func=cmd_decode)

    ts = sub.add_parser("train-synth", help="train the view synthesis networks")
    ts.add_argument("manifests", nargs="+")
    ts.add_argument("--val")
    ts.add_argument("--steps", type=int, default=1000)
    ts.add_argument("--batch", type=int, default=10)
    ts.add_argument("--lr", type=float, default=2e-4)
    ts.add_argument("--lr-min", dest="lr_min", type=float)
    ts.add_argument("--gamma", type=float, default=0.01)
    ts.add_argument("--val-every", dest="val_every", type=int, default=100)
    ts.add_argument("--warmup", type=int, default=0,
                    help="disparity-only steps before adversarial training")
    ts.add_argument("--freeze-disparity", dest="freeze_disparity", action="store_true",
                    help="train only the colour network after the warm-up")
    common(ts, qp=False)
    ts.set_defaults(func=cmd_train_synth)

    tq = sub.add_parser("train-qe", help="train the enhancement network")
    tq.add_argument("manifests", nargs="+")
    tq.add_argument("--train-qps", dest="train_qps", default="34")
    tq.add_argument("--synth-model", dest="synth_model")
    tq.add_argument("--steps", type=int, default=1000)
    tq.add_argument("--batch", type=int, default=128)
    tq.add_argument("--patch", type=int, default=64)
    tq.add_argument("--lr", type=float, default=2e-4)
    tq.add_argument("--lr-min", dest="lr_min", type=float)
    common(tq, qp=False)
    tq.set_defaults(func=cmd_train_qe)

    ev = sub.add_parser("eval", help="per-view metrics and BD deltas between RD curves")
    ev.add_argument("original", nargs="?")
    ev.add_argument("reconstructed", nargs="?")
    ev.add_argument("--rd", action="append", help="RD CSV (rate_bpp, psnr_db, ssim); repeatable")
    ev.add_argument("--anchor", help="name (file stem) of the anchor curve")
    common(ev, qp=False)
    ev.set_defaults(func=cmd_eval)

    rs = sub.add_parser("rd-sweep", help="encode/decode at several QPs and report RD curves")
    rs.add_argument("manifest")
    rs.add_argument("--qps", default="22,27,32,37")
    rs.add_argument("--configs", default=",".join(CONFIGURATIONS))
    rs.add_argument("--anchor", default="codec")
    rs.add_argument("--synth-model", dest="synth_model")
    rs.add_argument("--qe-model", dest="qe_model")
    rs.add_argument("--no-enhance", dest="no_enhance", action="store_true")
    common(rs, qp=False)
    rs.set_defaults(func=cmd_rd_sweep)
    return p


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        overrides = json.loads(Path(args.config).read_text())
        for key, value in overrides.items():
            key = key.replace("-", "_")
            if key == "lambda":
                key = "lam"
            if not hasattr(args, key):
                parser.error(f"config key {key!r} is not an option of {args.command}")
            setattr(args, key, value)
    return args


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except LfError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
