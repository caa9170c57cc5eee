"""
命令行入口

子命令：gen、stats、embed-scale、embed-snowflake、dls build|query、audit-report、cluster-demo。
退出码：0 成功，2 审计发现超出声明界的点对，1 其他错误。
"""

import argparse
import json
import logging
import sys
from dataclasses import asdict
from typing import Any, Dict, Optional, Sequence

import numpy as np

from .apps.clustering import cluster_demo
from .apps.labeling import dls_build, dls_query, label_summary
from .audit.report import PairTable, ratio_report, summary_payload
from .core.config import get_settings
from .core.errors import BadParams, EmbeddingError
from .core.logging import setup_logging
from .embed.single_scale import SingleScaleParams, build_single_scale, contract_audit, window_lower_bound
from .embed.single_scale import pair_table as scale_pair_table
from .embed.snowflake import build_snowflake, distortion_audit
from .embed.snowflake import pair_table as snowflake_pair_table
from .metric.generators import GENERATORS, generate
from .metric.nets import estimate_doubling
from .metric.points import Norm, PointSet, normalize, pairwise_distances
from .storage.manager import Manager
from .utils.helpers import condensed, error_payload, pair_indices

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_AUDIT = 2

GENERATOR_OPTIONS = {
    "n": int, "side": int, "dim": int, "spacing": float, "intrinsic": int, "ambient": int,
    "noise": float, "extent": float, "radius": float, "depth": int, "ratio": float, "power": float,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """用法错误不退出进程，交给 main 返回退出码 1"""

    def error(self, message: str) -> None:
        raise UsageError(f"{self.prog}: error: {message}")


def _eps(value: str) -> float:
    eps = float(value)
    if not 0.0 < eps < 0.25:
        raise argparse.ArgumentTypeError(f"eps must satisfy 0 < eps < 1/4, got {value}")
    return eps


def _unit_open(value: str) -> float:
    x = float(value)
    if not 0.0 < x < 1.0:
        raise argparse.ArgumentTypeError(f"value must lie in (0, 1), got {value}")
    return x


def _positive(value: str) -> float:
    x = float(value)
    if not x > 0:
        raise argparse.ArgumentTypeError(f"value must be positive, got {value}")
    return x


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--eps", type=_eps, default=0.1)
    common.add_argument("--delta", type=_eps, default=None, help="缺省 0.1，ℓ∞ 下为 ε²/4")
    common.add_argument("--alpha", type=_unit_open, default=0.5)
    common.add_argument("--norm", choices=[norm.value for norm in Norm], default=None)
    common.add_argument("--out", default=None, help="输出路径（报告写 <out>.csv 与 <out>.json）")
    common.add_argument("--format", choices=["csv", "json"], default="csv")
    common.add_argument("--config", default=None, help="YAML 配置文件")
    common.add_argument("--log-level", default=None)

    parser = _Parser(prog="snowembed", description="Low-distortion dimension reduction for doubling point sets")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("gen", parents=[common], help="生成合成点集")
    gen.add_argument("kind", choices=sorted(GENERATORS))
    for name, kind in GENERATOR_OPTIONS.items():
        gen.add_argument(f"--{name}", type=kind, default=None)

    stats = sub.add_parser("stats", parents=[common], help="倍增维数、直径与纵横比")
    stats.add_argument("input")

    scale = sub.add_parser("embed-scale", parents=[common], help="单尺度嵌入与契约审计")
    scale.add_argument("input")
    scale.add_argument("--r", type=_positive, default=None, help="尺度（归一化单位，缺省为直径）")
    scale.add_argument("--dump", default=None, help="嵌入转储路径")
    scale.add_argument("--decomposition", default=None, help="分解转储路径")

    snow = sub.add_parser("embed-snowflake", parents=[common], help="雪花嵌入与失真审计")
    snow.add_argument("input")
    snow.add_argument("--dump", default=None, help="嵌入转储路径")

    dls = sub.add_parser("dls", help="距离标注")
    dls_sub = dls.add_subparsers(dest="dls_command", required=True, parser_class=_Parser)
    dls_build_parser = dls_sub.add_parser("build", parents=[common])
    dls_build_parser.add_argument("input")
    dls_query_parser = dls_sub.add_parser("query", parents=[common])
    dls_query_parser.add_argument("labels")
    dls_query_parser.add_argument("first", type=int)
    dls_query_parser.add_argument("second", type=int)

    report = sub.add_parser("audit-report", parents=[common], help="由点集与嵌入转储重新生成报告")
    report.add_argument("input")
    report.add_argument("dump")

    cluster = sub.add_parser("cluster-demo", parents=[common], help="原空间与嵌入空间的 k-center")
    cluster.add_argument("input")
    cluster.add_argument("--k", type=int, default=4)
    return parser


def _emit(payload: Dict[str, Any]) -> None:
    sys.stdout.write(json.dumps(payload, sort_keys=True, ensure_ascii=False) + "\n")


def _load(args: argparse.Namespace, storage: Manager) -> PointSet:
    return normalize(storage.load_points(args.input, norm=args.norm))


def _write_report(args: argparse.Namespace, storage: Manager, table: Optional[PairTable],
                  summary: Dict[str, Any]) -> None:
    if args.out:
        storage.save_report(table, summary, args.out, args.format)
        return
    _emit(summary)


def cmd_gen(args: argparse.Namespace, storage: Manager) -> int:
    params = {name: getattr(args, name) for name in GENERATOR_OPTIONS if getattr(args, name) is not None}
    s = generate(args.kind, params, seed=args.seed, norm=args.norm or Norm.L2)
    if not args.out:
        np.savetxt(sys.stdout, s.points, fmt="%.17g", delimiter=",",
                   header=f"norm={s.norm.tag} scale=1", comments="# ")
        return EXIT_OK
    storage.save_points(s, args.out, args.format)
    return EXIT_OK


def cmd_stats(args: argparse.Namespace, storage: Manager) -> int:
    settings = get_settings(args.config)
    s = _load(args, storage)
    estimate = estimate_doubling(s, settings.embedding.doubling_max_centers, args.seed)
    _emit({
        "n": s.n,
        "dim": s.dim,
        "norm": s.norm.value,
        "scale": s.scale,
        "diameter": s.diameter,
        "diameter_original": s.denormalize(s.diameter),
        "aspect_ratio": s.aspect_ratio,
        "lambda_hat": estimate.lambda_hat,
        "dim_hat": estimate.dim_hat,
    })
    return EXIT_OK


def cmd_embed_scale(args: argparse.Namespace, storage: Manager) -> int:
    settings = get_settings(args.config)
    s = _load(args, storage)
    delta = args.delta
    if delta is None:
        delta = args.eps ** 2 / 4.0 if s.norm is Norm.LINF else 0.1
    params = SingleScaleParams.create(r=args.r or max(s.diameter, 1.0), delta=delta, eps=args.eps,
                                      norm=s.norm, seed=args.seed)
    e = build_single_scale(s, params, settings.embedding)
    audit = contract_audit(e, settings.audit)
    if args.dump:
        storage.save_embedding(e.header(), e.images, args.dump)
    if args.decomposition:
        storage.save_decomposition(e.decomposition, args.decomposition)
    summary = {"command": "embed-scale", "header": e.header(), "audit": audit.model_dump(mode="json")}
    _write_report(args, storage, scale_pair_table(e), summary)
    return EXIT_OK if audit.passed else EXIT_AUDIT


def cmd_embed_snowflake(args: argparse.Namespace, storage: Manager) -> int:
    settings = get_settings(args.config)
    s = _load(args, storage)
    e = build_snowflake(s, alpha=args.alpha, eps=args.eps, seed=args.seed, settings=settings.embedding)
    audit = distortion_audit(e, settings.audit)
    if args.dump:
        storage.save_embedding(e.header(), e.images, args.dump)
    summary = {"command": "embed-snowflake", "header": e.header(), "audit": audit.model_dump(mode="json")}
    _write_report(args, storage, snowflake_pair_table(e), summary)
    return EXIT_OK if audit.passed else EXIT_AUDIT


def cmd_dls(args: argparse.Namespace, storage: Manager) -> int:
    settings = get_settings(args.config)
    if args.dls_command == "query":
        labels = storage.load_labels(args.labels)
        result = dls_query(labels.by_id(args.first), labels.by_id(args.second))
        _emit({"first": args.first, "second": args.second, **asdict(result)})
        return EXIT_OK

    s = _load(args, storage)
    if s.norm is not Norm.L2:
        raise BadParams(f"Distance labels need an l2 point set, got {s.norm.value}")
    e = build_snowflake(s, alpha=args.alpha, eps=args.eps, seed=args.seed, settings=settings.embedding)
    labels = dls_build(e)
    summary = label_summary(labels, s.aspect_ratio)
    logger.info(f"Label size {summary['bits_per_label']} bits vs nominal {summary['nominal_bits']:.1f}")
    if args.out:
        summary["file"] = storage.save_labels(labels, args.out)
    _emit(summary)
    return EXIT_OK


def cmd_audit_report(args: argparse.Namespace, storage: Manager) -> int:
    """按转储头中的类型选择参考函数：雪花看 d^α 带宽，单尺度看 1-Lipschitz 与窗口下界"""
    settings = get_settings(args.config)
    s = _load(args, storage)
    header, images = storage.load_embedding(args.dump)
    if images.shape[0] != s.n:
        raise EmbeddingError("Embedding dump does not match the point set", dump_rows=images.shape[0], n=s.n)
    params = header.get("params") or {}
    norm = Norm.parse(params.get("norm", s.norm.value))
    i, j = pair_indices(s.n)
    source = condensed(s.distances)
    image = condensed(pairwise_distances(images, norm=norm))
    audit = settings.audit
    common = dict(slack=audit.float_slack, max_violations=audit.max_violations)

    if header.get("kind") == "snowflake":
        alpha, eps = float(params["alpha"]), float(params["eps"])
        expected = source ** alpha
        limit = 1.0 + audit.band_c * eps
        report = ratio_report(f"d^{alpha:g}", i, j, source, image, expected, **common)
        if report.band is not None and report.band > limit * (1.0 + audit.float_slack):
            report = ratio_report(f"d^{alpha:g}", i, j, source, image, expected, lower=report.min_ratio,
                                  upper=report.min_ratio * limit, check="band", **common)
        reports = {"distortion": report}
        window = np.ones(source.size, dtype=bool)
    else:
        p = SingleScaleParams(**params)
        expected = p.transform(source)
        low, high = p.window
        reports = {
            "lipschitz": ratio_report("identity", i, j, source, image, source, upper=1.0, check="lipschitz",
                                      **common),
            "window": ratio_report(p.transform.kind.reference, i, j, source, image, expected, window=p.window,
                                   lower=window_lower_bound(p, audit)[0], upper=1.0, check="window", **common),
        }
        window = (source >= low) & (source <= high)

    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(expected > 0, image / expected, 0.0)
    table = PairTable(i, j, source, image, ratio, window)
    summary = summary_payload(reports, {"command": "audit-report", "kind": header.get("kind")})
    _write_report(args, storage, table, summary)
    return EXIT_OK if all(report.ok for report in reports.values()) else EXIT_AUDIT


def cmd_cluster_demo(args: argparse.Namespace, storage: Manager) -> int:
    settings = get_settings(args.config)
    s = _load(args, storage)
    e = build_snowflake(s, alpha=args.alpha, eps=args.eps, seed=args.seed, settings=settings.embedding)
    _emit(cluster_demo(e, args.k))
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen,
    "stats": cmd_stats,
    "embed-scale": cmd_embed_scale,
    "embed-snowflake": cmd_embed_snowflake,
    "dls": cmd_dls,
    "audit-report": cmd_audit_report,
    "cluster-demo": cmd_cluster_demo,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    解析参数并执行子命令

    Args:
        argv: 参数列表，缺省为 sys.argv[1:]

    Returns:
        退出码
    """
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv) if argv is not None else None)
    except UsageError as e:
        sys.stderr.write(f"{parser.format_usage()}{e}\n")
        return EXIT_ERROR

    settings = get_settings(args.config)
    log = settings.logging
    setup_logging(args.log_level or log.log_level, log.log_dir, log.log_file, log.file_logging)

    try:
        return COMMANDS[args.command](args, Manager())
    except EmbeddingError as e:
        logger.error(f"{args.command} failed: {e}")
        sys.stderr.write(json.dumps(error_payload(e, args.command), sort_keys=True, ensure_ascii=False) + "\n")
        return EXIT_ERROR
    except (OSError, ValueError) as e:
        logger.error(f"{args.command} failed: {str(e)}")
        sys.stderr.write(json.dumps(error_payload(e, args.command), sort_keys=True, ensure_ascii=False) + "\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
