"""정책 번들: manifest.json + marginal.json + copula.{json,kde} 를 담은 zip"""
import io
import logging
import zipfile
from pathlib import Path

import numpy as np

from models.copula import Copula, GaussianCopula, GaussianMixtureCopula, IndependenceCopula, KdeCopula
from models.marginal import MarginalModel
from models.nn import NetworkParams
from models.policy import CopulaPolicy
from schemas.commons import CopulaKind
from schemas.records import (
    BundleManifest, GaussianCopulaRecord, GmcRecord, IndependenceRecord, MarginalRecord, NetworkRecord,
)
from storage.files import dump_json, parse_json
from utils.errors import ConfigError, ShapeError

logger = logging.getLogger(__name__)

KDE_TAG = b"CILKDE01"
MANIFEST = "manifest.json"
MARGINAL = "marginal.json"
# zip 엔트리 시각을 고정해야 재실행 시 바이트가 같음
_FIXED_TIME = (1980, 1, 1, 0, 0, 0)


def network_to_record(net: NetworkParams) -> NetworkRecord:
    return NetworkRecord(
        layout=net.layout.as_tuple(), activation=net.activation,
        w1=net.w1.tolist(), b1=net.b1.tolist(), w2=net.w2.tolist(), b2=net.b2.tolist(),
    )


def network_from_record(rec: NetworkRecord) -> NetworkParams:
    net = NetworkParams(
        w1=np.array(rec.w1, dtype=float).reshape(rec.layout[1], rec.layout[0]),
        b1=np.array(rec.b1, dtype=float),
        w2=np.array(rec.w2, dtype=float).reshape(rec.layout[2], rec.layout[1]),
        b2=np.array(rec.b2, dtype=float),
        activation=rec.activation,
    )
    if net.layout.as_tuple() != tuple(rec.layout):
        raise ShapeError(f"network arrays do not match layout {rec.layout}")
    return net


def marginal_to_record(m: MarginalModel) -> MarginalRecord:
    return MarginalRecord(
        n_components=m.n_components, n_coords=m.n_coords,
        agent_coords=[list(c) for c in m.agent_coords], log_spread=m.log_spread.tolist(),
        fitted=m.fitted, network=network_to_record(m.net), normalization=m.normalization,
    )


def marginal_from_record(rec: MarginalRecord) -> MarginalModel:
    m = MarginalModel(
        net=network_from_record(rec.network), log_spread=np.array(rec.log_spread, dtype=float),
        n_components=rec.n_components, agent_coords=tuple(tuple(c) for c in rec.agent_coords),
        fitted=rec.fitted, normalization=rec.normalization,
    )
    if m.n_coords != rec.n_coords:
        raise ShapeError(f"marginal record lists {rec.n_coords} coordinates, arrays hold {m.n_coords}")
    return m


def kde_to_bytes(c: KdeCopula) -> bytes:
    """태그, '<u8' (n, D), '<f8' 대역폭 D개, '<f8' 지지점 n·D개"""
    n, dim = c.points.shape
    return b"".join([
        KDE_TAG,
        np.array([n, dim], dtype="<u8").tobytes(),
        c.bandwidth.astype("<f8").tobytes(),
        np.ascontiguousarray(c.points, dtype="<f8").tobytes(),
    ])


def kde_from_bytes(raw: bytes) -> KdeCopula:
    if raw[:len(KDE_TAG)] != KDE_TAG:
        raise ConfigError("not a KDE copula record (bad format tag)")
    offset = len(KDE_TAG)
    n, dim = (int(v) for v in np.frombuffer(raw, dtype="<u8", count=2, offset=offset))
    offset += 16
    if len(raw) != offset + 8 * dim * (n + 1):
        raise ShapeError(f"KDE record length does not match header (n={n}, D={dim})")
    bandwidth = np.frombuffer(raw, dtype="<f8", count=dim, offset=offset).astype(float)
    points = np.frombuffer(raw, dtype="<f8", count=n * dim, offset=offset + 8 * dim).astype(float).reshape(n, dim)
    return KdeCopula(points=points, bandwidth=bandwidth)


def copula_to_entry(c: Copula) -> tuple[str, bytes]:
    if isinstance(c, KdeCopula):
        return "copula.kde", kde_to_bytes(c)
    if isinstance(c, GaussianMixtureCopula):
        rec = GmcRecord(n_components=c.n_components, dim=c.dim, fitted=c.fitted, network=network_to_record(c.net))
    elif isinstance(c, GaussianCopula):
        rec = GaussianCopulaRecord(corr=c.corr.tolist())
    elif isinstance(c, IndependenceCopula):
        rec = IndependenceRecord(dim=c.dim)
    else:
        raise ConfigError(f"cannot serialize copula of type {type(c).__name__}")
    return "copula.json", dump_json(rec).encode("utf-8")


def copula_from_entry(kind: CopulaKind, name: str, raw: bytes) -> Copula:
    if kind == CopulaKind.KDE:
        return kde_from_bytes(raw)
    if kind == CopulaKind.GMM:
        rec = parse_json(raw, GmcRecord, name)
        return GaussianMixtureCopula(net=network_from_record(rec.network), n_components=rec.n_components,
                                     dim=rec.dim, fitted=rec.fitted)
    if kind == CopulaKind.GAUSSIAN:
        return GaussianCopula(corr=np.array(parse_json(raw, GaussianCopulaRecord, name).corr, dtype=float))
    return IndependenceCopula(dim=parse_json(raw, IndependenceRecord, name).dim)


def policy_to_bytes(p: CopulaPolicy) -> bytes:
    copula_name, copula_raw = copula_to_entry(p.copula)
    manifest = BundleManifest(
        copula_kind=p.copula.kind, dim=p.dim, n_components=p.marginal.n_components,
        copula_components=p.copula.n_components if isinstance(p.copula, GaussianMixtureCopula) else None,
        normalization=p.normalization, entries=[MARGINAL, copula_name],
    )
    entries = [
        (MANIFEST, dump_json(manifest).encode("utf-8")),
        (MARGINAL, dump_json(marginal_to_record(p.marginal)).encode("utf-8")),
        (copula_name, copula_raw),
    ]
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", compression=zipfile.ZIP_STORED) as zf:
        for name, raw in entries:
            info = zipfile.ZipInfo(name, date_time=_FIXED_TIME)
            info.external_attr = 0o644 << 16
            zf.writestr(info, raw)
    return buf.getvalue()


def policy_from_bytes(raw: bytes, source: str = "<bundle>") -> CopulaPolicy:
    try:
        with zipfile.ZipFile(io.BytesIO(raw)) as zf:
            manifest = parse_json(zf.read(MANIFEST), BundleManifest, f"{source}:{MANIFEST}")
            contents = {name: zf.read(name) for name in manifest.entries}
    except (zipfile.BadZipFile, KeyError) as e:
        raise ConfigError(f"{source}: not a valid policy bundle ({e})") from e

    marginal = marginal_from_record(parse_json(contents[MARGINAL], MarginalRecord, f"{source}:{MARGINAL}"))
    copula_name = next(n for n in manifest.entries if n != MARGINAL)
    copula = copula_from_entry(manifest.copula_kind, f"{source}:{copula_name}", contents[copula_name])
    policy = CopulaPolicy(marginal=marginal, copula=copula)
    if policy.dim != manifest.dim:
        raise ShapeError(f"{source}: manifest D={manifest.dim} but components have D={policy.dim}")
    return policy


def save_policy(p: CopulaPolicy, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(policy_to_bytes(p))
    logger.info("saved %s policy bundle to %s", p.copula.kind.value, path)
    return path


def load_policy(path: Path) -> CopulaPolicy:
    path = Path(path)
    return policy_from_bytes(path.read_bytes(), str(path))
