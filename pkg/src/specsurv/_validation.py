"""Input validation helpers shared across estimators and the CLI."""

import numpy as np

__all__ = [
    "check_features",
    "check_survival_arrays",
    "check_positive_scores",
    "check_weight_matrix",
    "check_survival_y",
]


def check_features(X, n_rows=None):
    """Coerce ``X`` to a 2-d float64 array and verify it is finite.

    Parameters
    ----------
    X : array-like of shape (n, d)
    n_rows : int, optional
        Expected number of rows.

    Returns
    -------
    ndarray of shape (n, d)
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise ValueError(f"feature matrix must be 2-d, got ndim={X.ndim}")
    if not np.all(np.isfinite(X)):
        bad = int(np.argwhere(~np.isfinite(X).all(axis=1))[0, 0])
        raise ValueError(f"feature matrix contains a non-finite entry (row {bad})")
    if n_rows is not None and X.shape[0] != n_rows:
        raise ValueError(f"feature matrix has {X.shape[0]} rows, expected {n_rows}")
    return X


def check_survival_arrays(time, event):
    """Validate observation times and event indicators.

    Times must be strictly positive and finite; the event marker is
    coerced to bool. Raises ``ValueError`` naming the first offending row.
    """
    time = np.asarray(time, dtype=np.float64).reshape(-1)
    event = np.asarray(event).reshape(-1)
    if time.shape[0] != event.shape[0]:
        raise ValueError(
            f"time and event lengths differ: {time.shape[0]} vs {event.shape[0]}"
        )
    if time.shape[0] == 0:
        raise ValueError("empty dataset: no observations")
    finite = np.isfinite(time)
    if not finite.all():
        raise ValueError(f"non-finite observation time at row {int(np.argmin(finite))}")
    positive = time > 0
    if not positive.all():
        raise ValueError(
            f"non-positive observation time at row {int(np.argmin(positive))}"
        )
    if event.dtype != np.bool_:
        as_float = event.astype(np.float64)
        if not np.isin(as_float, (0.0, 1.0)).all():
            bad = int(np.argwhere(~np.isin(as_float, (0.0, 1.0)))[0, 0])
            raise ValueError(f"event indicator at row {bad} is not 0/1")
        event = as_float.astype(bool)
    return time, event


def check_survival_y(y):
    """Split a two-column ``(time, event)`` target into validated arrays.

    Accepts an (n, 2) array, a (time, event) tuple/list pair, or a record
    array with ``time``/``event`` fields.
    """
    if isinstance(y, (tuple, list)) and len(y) == 2:
        return check_survival_arrays(y[0], y[1])
    arr = np.asarray(y)
    if arr.dtype.names and {"time", "event"} <= set(arr.dtype.names):
        return check_survival_arrays(arr["time"], arr["event"])
    if arr.ndim == 2 and arr.shape[1] == 2:
        return check_survival_arrays(arr[:, 0], arr[:, 1])
    raise ValueError(
        "y must be an (n, 2) array of [time, event], a (time, event) pair, "
        "or a record array with 'time' and 'event' fields"
    )


def check_positive_scores(scores, n=None):
    """Validate a strictly positive score vector."""
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    if n is not None and scores.shape[0] != n:
        raise ValueError(f"expected {n} scores, got {scores.shape[0]}")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores contain non-finite entries")
    if np.any(scores <= 0):
        raise ValueError(f"scores must be strictly positive (row {int(np.argmax(scores <= 0))})")
    return scores


def check_weight_matrix(W, n):
    """Validate a pairwise weight matrix, or pass through the unit form.

    ``None`` stands for the all-ones matrix and is kept in that compact
    form. Dense matrices must be (n, n) with strictly positive entries.
    """
    if W is None:
        return None
    W = np.asarray(W, dtype=np.float64)
    if W.shape != (n, n):
        raise ValueError(f"weight matrix must be ({n}, {n}), got {W.shape}")
    if not np.all(np.isfinite(W)):
        raise ValueError("weight matrix contains non-finite entries")
    if np.any(W <= 0):
        j, i = np.argwhere(W <= 0)[0]
        raise ValueError(f"weight matrix must be strictly positive, W[{j}, {i}] <= 0")
    return W
