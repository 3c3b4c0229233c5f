"""Dataset ingestion, synthetic generation, splitting, and model files.

External formats:

  * delimiter-separated matrices, one sample per row (transposed on load to
    the internal features x samples layout)
  * MNIST IDX image files (big-endian, magic 0x00000803), split into left
    and right image halves as the two views
  * a binary model container, documented in the README: 8-byte magic,
    little-endian version word, then length-prefixed float64 matrices
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .baselines import CCASolution
from .core import CanonicalPair, Hyperparams, Penalty, TwoViewDataset, ViewMatrix
from .errors import (
    BadMagic,
    CorruptFile,
    EmptyInput,
    NonNumericField,
    RaggedRows,
    TruncatedFile,
    VersionMismatch,
)
from .kernel import GramMatrix, KernelKind, KernelModel, KernelSpec, gram_gaussian, gram_linear

MODEL_MAGIC = b"RMENCCA\x00"
MODEL_VERSION = 1

_KIND_LINEAR = 0
_KIND_KERNEL = 1


# ----------------------------------------------------------- synthetic data

@dataclass(frozen=True)
class SyntheticSpec:
    """Planted-correlation synthetic problem description.

    correlations are the population canonical correlations of the noise-free
    views, sorted descending in (0, 1].  noise_scale adds isotropic Gaussian
    noise after mixing, which shrinks the observable correlations below the
    planted values.
    """

    n: int
    d1: int
    d2: int
    k_true: int
    correlations: tuple[float, ...]
    noise_scale: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        corr = tuple(float(c) for c in self.correlations)
        object.__setattr__(self, "correlations", corr)
        if self.n < 1 or self.d1 < 1 or self.d2 < 1:
            raise ValueError(f"sizes must be positive: n={self.n}, d1={self.d1}, d2={self.d2}")
        if not 1 <= self.k_true <= min(self.d1, self.d2):
            raise ValueError(f"k_true={self.k_true} must lie in [1, min(d1, d2)]")
        if len(corr) != self.k_true:
            raise ValueError(f"need {self.k_true} correlations, got {len(corr)}")
        if any(not 0.0 < c <= 1.0 for c in corr):
            raise ValueError(f"correlations must lie in (0, 1]: {corr}")
        if any(a < b for a, b in zip(corr, corr[1:])):
            raise ValueError(f"correlations must be sorted descending: {corr}")
        if self.noise_scale < 0.0 or not np.isfinite(self.noise_scale):
            raise ValueError(f"noise_scale must be finite and nonnegative: {self.noise_scale}")


def _well_conditioned(rng: np.random.Generator, d: int) -> np.ndarray:
    # random mixing with singular values in [1, 2] so the planted structure
    # is never near-degenerate
    q1, _ = np.linalg.qr(rng.standard_normal((d, d)))
    q2, _ = np.linalg.qr(rng.standard_normal((d, d)))
    s = rng.uniform(1.0, 2.0, size=d)
    return (q1 * s) @ q2.T


def synth_two_view(spec: SyntheticSpec):
    """Generate paired views with known population canonical structure.

    Shared latent factors z feed the first k_true factor rows of each view
    with per-factor weights chosen so corr(factor_x_i, factor_y_i) equals
    spec.correlations[i]; the remaining factors are independent.  Returns
    the dataset and the noise-free population optimum (pair, correlations)
    as baselines.CCASolution.

    Factor buffers are reused in place, so peak memory stays O(n * d) even
    at millions of samples.
    """
    rng = np.random.default_rng(spec.seed)
    n, d1, d2, k = spec.n, spec.d1, spec.d2, spec.k_true
    alpha = np.sqrt(np.asarray(spec.correlations))
    beta = np.sqrt(1.0 - alpha**2)

    z = rng.standard_normal((k, n))
    fx = rng.standard_normal((d1, n))
    fy = rng.standard_normal((d2, n))
    fx[:k] = alpha[:, None] * z + beta[:, None] * fx[:k]
    fy[:k] = alpha[:, None] * z + beta[:, None] * fy[:k]
    del z
    a = _well_conditioned(rng, d1)
    b = _well_conditioned(rng, d2)
    x = a @ fx
    del fx
    y = b @ fy
    del fy
    if spec.noise_scale > 0:
        noise = rng.standard_normal(x.shape)
        noise *= spec.noise_scale
        x += noise
        noise = rng.standard_normal(y.shape)
        noise *= spec.noise_scale
        y += noise

    u_true = np.linalg.inv(a).T[:, :k]
    v_true = np.linalg.inv(b).T[:, :k]
    ds = TwoViewDataset(x=ViewMatrix.of(x), y=ViewMatrix.of(y))
    truth = CCASolution(
        pair=CanonicalPair(u=u_true, v=v_true),
        correlations=spec.correlations,
    )
    return ds, truth


def split_train_validation(
    ds: TwoViewDataset, fraction: float, seed: int
) -> tuple[TwoViewDataset, TwoViewDataset]:
    """Disjoint seeded split; fraction is the validation share."""
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must lie strictly between 0 and 1, got {fraction}")
    n = ds.n
    n_val = int(round(n * fraction))
    n_val = min(max(n_val, 1), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    val_idx = np.sort(perm[:n_val])
    train_idx = np.sort(perm[n_val:])
    return _take(ds, train_idx), _take(ds, val_idx)


def _take(ds: TwoViewDataset, idx: np.ndarray) -> TwoViewDataset:
    return TwoViewDataset(
        x=ViewMatrix(np.ascontiguousarray(ds.x.data[:, idx]), ds.x.feature_means, ds.x.centered),
        y=ViewMatrix(np.ascontiguousarray(ds.y.data[:, idx]), ds.y.feature_means, ds.y.centered),
    )


# ---------------------------------------------------------------- DSV files

def load_dsv(path: str, delimiter: str = ",") -> ViewMatrix:
    """Parse a delimiter-separated numeric table, one sample per row, into
    the internal features x samples layout."""
    rows: list[list[float]] = []
    width = -1
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(delimiter)
            if width == -1:
                width = len(fields)
            elif len(fields) != width:
                raise RaggedRows(
                    f"{path}: line {lineno} has {len(fields)} fields, expected {width}"
                )
            try:
                rows.append([float(tok) for tok in fields])
            except ValueError as exc:
                raise NonNumericField(f"{path}: line {lineno}: {exc}") from None
    if not rows:
        raise EmptyInput(f"{path}: no data rows")
    return ViewMatrix.of(np.asarray(rows, dtype=np.float64).T)


def save_dsv(view: ViewMatrix, path: str, delimiter: str = ",") -> None:
    """Write samples as rows at 17 significant digits (lossless for
    float64)."""
    data = view.data.T
    with open(path, "w", encoding="utf-8") as fh:
        for row in data:
            fh.write(delimiter.join("%.17g" % v for v in row))
            fh.write("\n")


# -------------------------------------------------------------- MNIST halves

def load_mnist_halves(images_path: str) -> TwoViewDataset:
    """Split IDX-format images into left and right halves as the two views,
    with pixels scaled to [0, 1]."""
    with open(images_path, "rb") as fh:
        header = fh.read(16)
        if len(header) < 16:
            raise TruncatedFile(f"{images_path}: header is {len(header)} bytes, need 16")
        magic, count, rows, cols = struct.unpack(">IIII", header)
        if magic != 0x00000803:
            raise BadMagic(f"{images_path}: magic 0x{magic:08x}, expected 0x00000803")
        payload = fh.read(count * rows * cols)
    if len(payload) < count * rows * cols:
        raise TruncatedFile(
            f"{images_path}: {len(payload)} pixel bytes, need {count * rows * cols}"
        )
    images = np.frombuffer(payload, dtype=np.uint8).reshape(count, rows, cols)
    images = images.astype(np.float64) / 255.0
    half = cols // 2
    left = images[:, :, :half].reshape(count, rows * half).T
    right = images[:, :, half:].reshape(count, rows * (cols - half)).T
    return TwoViewDataset(
        x=ViewMatrix.of(np.ascontiguousarray(left)),
        y=ViewMatrix.of(np.ascontiguousarray(right)),
    )


# --------------------------------------------------------------- model files

@dataclass(frozen=True, eq=False)
class ModelFile:
    """Everything needed to project new data: hyperparameters, the training
    feature means for centering, and either a linear pair or a kernel
    model."""

    version: int
    hp: Hyperparams
    means_x: np.ndarray
    means_y: np.ndarray
    pair: CanonicalPair | None = None
    kernel: KernelModel | None = None


def _write_matrix(fh, m: np.ndarray) -> None:
    m = np.ascontiguousarray(m, dtype="<f8")
    if m.ndim == 1:
        m = m.reshape(-1, 1)
    fh.write(struct.pack("<QQ", m.shape[0], m.shape[1]))
    fh.write(m.tobytes())


def _read_exact(fh, size: int, what: str) -> bytes:
    buf = fh.read(size)
    if len(buf) != size:
        raise CorruptFile(f"unexpected end of file while reading {what}")
    return buf


def _read_matrix(fh, what: str) -> np.ndarray:
    r, c = struct.unpack("<QQ", _read_exact(fh, 16, what + " shape"))
    if r > 1 << 40 or c > 1 << 40:
        raise CorruptFile(f"implausible {what} shape {r} x {c}")
    buf = _read_exact(fh, 8 * r * c, what)
    return np.frombuffer(buf, dtype="<f8").reshape(r, c).copy()


_HP_STRUCT = "<IdddddIdqqB"


def _write_hp(fh, hp: Hyperparams) -> None:
    batch = -1 if hp.batch_size is None else hp.batch_size
    pen = 0 if hp.penalty is Penalty.L21 else 1
    fh.write(struct.pack(
        _HP_STRUCT,
        hp.k, hp.lambda1, hp.lambda2, hp.eta, hp.gamma, hp.zeta,
        hp.max_iters, hp.tol, batch, hp.seed, pen,
    ))


def _read_hp(fh) -> Hyperparams:
    raw = _read_exact(fh, struct.calcsize(_HP_STRUCT), "hyperparameters")
    k, l1, l2, eta, gamma, zeta, iters, tol, batch, seed, pen = struct.unpack(_HP_STRUCT, raw)
    return Hyperparams(
        k=k, lambda1=l1, lambda2=l2, eta=eta, gamma=gamma, zeta=zeta,
        max_iters=iters, tol=tol,
        batch_size=None if batch < 0 else batch,
        seed=seed,
        penalty=Penalty.L21 if pen == 0 else Penalty.FROBENIUS,
    )


def _write_kernel_spec(fh, spec: KernelSpec) -> None:
    kind = 1 if spec.kind is KernelKind.GAUSSIAN else 0
    width = spec.width if spec.width is not None else float("nan")
    fh.write(struct.pack("<Bd", kind, width))


def _read_kernel_spec(fh) -> KernelSpec:
    kind, width = struct.unpack("<Bd", _read_exact(fh, 9, "kernel spec"))
    if kind == 1:
        return KernelSpec(kind=KernelKind.GAUSSIAN, width=width)
    return KernelSpec(kind=KernelKind.LINEAR)


def save_model(model: ModelFile, path: str) -> None:
    if (model.pair is None) == (model.kernel is None):
        raise ValueError("exactly one of pair or kernel must be set")
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<I", MODEL_VERSION))
        kind = _KIND_LINEAR if model.pair is not None else _KIND_KERNEL
        fh.write(struct.pack("<B", kind))
        _write_hp(fh, model.hp)
        _write_matrix(fh, model.means_x)
        _write_matrix(fh, model.means_y)
        if model.pair is not None:
            _write_matrix(fh, model.pair.u)
            _write_matrix(fh, model.pair.v)
        else:
            km = model.kernel
            _write_kernel_spec(fh, km.gram_x.spec)
            _write_kernel_spec(fh, km.gram_y.spec)
            _write_matrix(fh, km.gram_x.train_points.data)
            _write_matrix(fh, km.gram_y.train_points.data)
            _write_matrix(fh, km.w_x)
            _write_matrix(fh, km.w_y)


def load_model(path: str) -> ModelFile:
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 8, "magic")
        if magic != MODEL_MAGIC:
            raise CorruptFile(f"{path}: bad magic {magic!r}")
        (version,) = struct.unpack("<I", _read_exact(fh, 4, "version"))
        if version != MODEL_VERSION:
            raise VersionMismatch(f"{path}: version {version}, supported {MODEL_VERSION}")
        (kind,) = struct.unpack("<B", _read_exact(fh, 1, "model kind"))
        hp = _read_hp(fh)
        means_x = _read_matrix(fh, "means_x").ravel()
        means_y = _read_matrix(fh, "means_y").ravel()
        if kind == _KIND_LINEAR:
            u = _read_matrix(fh, "U")
            v = _read_matrix(fh, "V")
            _expect_eof(fh, path)
            return ModelFile(
                version=version, hp=hp, means_x=means_x, means_y=means_y,
                pair=CanonicalPair(u=u, v=v),
            )
        if kind != _KIND_KERNEL:
            raise CorruptFile(f"{path}: unknown model kind {kind}")
        spec_x = _read_kernel_spec(fh)
        spec_y = _read_kernel_spec(fh)
        train_x = ViewMatrix.of(_read_matrix(fh, "train_x"))
        train_y = ViewMatrix.of(_read_matrix(fh, "train_y"))
        w_x = _read_matrix(fh, "W_X")
        w_y = _read_matrix(fh, "W_Y")
        _expect_eof(fh, path)
    km = KernelModel(
        w_x=w_x, w_y=w_y,
        gram_x=_rebuild_gram(train_x, spec_x),
        gram_y=_rebuild_gram(train_y, spec_y),
        report=None,
    )
    return ModelFile(
        version=version, hp=hp, means_x=means_x, means_y=means_y, kernel=km,
    )


def _rebuild_gram(view: ViewMatrix, spec: KernelSpec) -> GramMatrix:
    if spec.kind is KernelKind.GAUSSIAN:
        return gram_gaussian(view, spec.width)
    return gram_linear(view)


def _expect_eof(fh, path: str) -> None:
    if fh.read(1):
        raise CorruptFile(f"{path}: trailing bytes after model payload")
