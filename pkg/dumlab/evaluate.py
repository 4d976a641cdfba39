# Copyright 2016 Netherlands eScience Center
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#   http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Metrics, uncertainty scores, multi seed aggregation and uncertainty grids.

Results are pandas DataFrames in long format with the columns of :data:`RESULT_COLUMNS`,
one row per method, setting, seed, metric and dataset.
Values are stored as fractions, tables render them multiplied by 100.
"""

import logging

import numpy as np
import pandas as pd
from scipy import special, stats

from .data import make_grid
from .errors import DomainError, ShapeError
from .numcore import no_grad

LOGGER = logging.getLogger(__name__)

RESULT_COLUMNS = ['method', 'setting', 'seed', 'metric', 'dataset', 'value']
SIMPLEX_TOLERANCE = 1e-6
UNCERTAINTY_KINDS = ('predictive', 'aleatoric', 'epistemic')


class UncertaintyScores(object):
    """Prediction and per input uncertainties

    All scores are uncertainties, higher means more uncertain.

    Args:
        predicted_label (numpy.ndarray): N predicted labels
        predictive (numpy.ndarray): N predictive uncertainties
        aleatoric (numpy.ndarray): N aleatoric uncertainties or None
        epistemic (numpy.ndarray): N epistemic uncertainties or None
        probs (numpy.ndarray): N x C predicted class probabilities

    """

    def __init__(self, predicted_label, predictive, aleatoric=None, epistemic=None, probs=None):
        self.predicted_label = np.asarray(predicted_label, dtype=np.int64)
        self.predictive = np.asarray(predictive, dtype=np.float64)
        self.aleatoric = None if aleatoric is None else np.asarray(aleatoric, dtype=np.float64)
        self.epistemic = None if epistemic is None else np.asarray(epistemic, dtype=np.float64)
        self.probs = None if probs is None else np.asarray(probs, dtype=np.float64)

    def __len__(self):
        return len(self.predicted_label)

    def available(self):
        """Uncertainty kinds which are present

        Returns:
            list[tuple[str, numpy.ndarray]]: kind and scores
        """
        kinds = []
        for kind in UNCERTAINTY_KINDS:
            values = getattr(self, kind)
            if values is not None:
                kinds.append((kind, values))
        return kinds


def categorical_entropy(probs):
    """Entropy in nats of each row of probs"""
    probs = np.asarray(probs, dtype=np.float64)
    return -special.xlogy(probs, probs).sum(axis=-1)


def accuracy(pred, truth):
    """Fraction of exact matches

    Args:
        pred (array_like): Predicted labels
        truth (array_like): True labels

    Returns:
        float: accuracy

    Raises:
        ShapeError: When lengths differ
    """
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ShapeError('{0} predictions for {1} labels'.format(len(pred), len(truth)))
    return float(np.mean(pred == truth))


def brier(probs, truth):
    """Brier score

    Squared distance between probabilities and one-hot labels, summed over classes and averaged over samples.

    Args:
        probs (numpy.ndarray): N x C class probabilities
        truth (array_like): N true labels

    Returns:
        float: score in [0, 2]

    Raises:
        DomainError: When a row of probs is off the simplex
        ShapeError: When number of rows and labels differ
    """
    probs = np.asarray(probs, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.int64)
    if probs.ndim != 2 or len(probs) != len(truth):
        raise ShapeError('{0} probability rows for {1} labels'.format(len(probs), len(truth)))
    if np.any(probs < -SIMPLEX_TOLERANCE) or np.any(np.abs(probs.sum(axis=1) - 1) > SIMPLEX_TOLERANCE):
        raise DomainError('Probabilities are not on the simplex')
    onehot = np.zeros_like(probs)
    onehot[np.arange(len(truth)), truth] = 1.0
    return float(np.mean(np.sum((probs - onehot) ** 2, axis=1)))


def auroc(id_uncertainty, ood_uncertainty):
    """Area under the ROC curve of detecting out-of-distribution samples by their uncertainty

    Computed by the Mann-Whitney rank statistic, ties count one half.
    1.0 means every OOD sample is more uncertain than every ID sample.

    Args:
        id_uncertainty (array_like): N uncertainties of in-distribution samples
        ood_uncertainty (array_like): M uncertainties of out-of-distribution samples

    Returns:
        float: AUROC in [0, 1]

    Raises:
        ShapeError: When either set is empty
    """
    id_uncertainty = np.ravel(np.asarray(id_uncertainty, dtype=np.float64))
    ood_uncertainty = np.ravel(np.asarray(ood_uncertainty, dtype=np.float64))
    n = len(id_uncertainty)
    m = len(ood_uncertainty)
    if n < 1 or m < 1:
        raise ShapeError('AUROC needs at least one ID and one OOD sample')
    ranks = stats.rankdata(np.concatenate([id_uncertainty, ood_uncertainty]))
    u = ranks[n:].sum() - m * (m + 1) / 2.0
    return float(u / (n * m))


class Grid(object):
    """Scalar field over a regular 2D lattice

    Args:
        values (numpy.ndarray): resolution x resolution values, rows have ascending y, columns ascending x
        extent (tuple[float, float, float, float]): x_min, x_max, y_min, y_max
        kind (str): What the values are, log_density or predictive_entropy

    """

    def __init__(self, values, extent, kind):
        self.values = np.asarray(values, dtype=np.float64)
        self.extent = tuple(float(v) for v in extent)
        self.kind = kind

    @property
    def resolution(self):
        return self.values.shape[0]

    def to_csv(self, path):
        """Write grid as CSV

        First line is the header x_min,x_max,y_min,y_max,resolution,
        second line the corresponding values, followed by one line per row of the grid.
        """
        with open(path, 'w') as f:
            f.write('x_min,x_max,y_min,y_max,resolution\n')
            f.write('{0!r},{1!r},{2!r},{3!r},{4}\n'.format(*(self.extent + (self.resolution,))))
            pd.DataFrame(self.values).to_csv(f, header=False, index=False, float_format='%.17g')
        LOGGER.info('Wrote %s grid to %s', self.kind, path)

    @classmethod
    def from_csv(cls, path, kind='unknown'):
        meta = pd.read_csv(path, nrows=1)
        values = pd.read_csv(path, skiprows=2, header=None).values
        extent = tuple(meta.loc[0, ['x_min', 'x_max', 'y_min', 'y_max']])
        return cls(values, extent, kind)


def uncertainty_grid(model, extent, resolution, transform=None):
    """Field of the uncertainty head over a 2D lattice of inputs

    For a NatPN head the field is the flow log density of the encoded grid point,
    for a GP head the predictive entropy.

    Args:
        model (dumlab.model.DumModel): Model which accepts 2D inputs
        extent (tuple[float, float, float, float]): x_min, x_max, y_min, y_max
        resolution (int): Number of points along each axis
        transform (callable): Maps raw grid points to model inputs, like standardization

    Returns:
        Grid: field, row-major with ascending y
    """
    points = make_grid(extent, resolution)
    if transform is not None:
        points = transform(points)
    kind, values = model.grid_field(points)
    return Grid(np.asarray(values).reshape(resolution, resolution), extent, kind)


def latent_spread(model, inputs):
    """Ratio of the smallest to the largest variance along the principal axes of the latents

    A ratio near zero means the encoder collapsed the inputs onto fewer dimensions.

    Args:
        model (dumlab.model.DumModel): Trained model
        inputs (numpy.ndarray): N x D inputs

    Returns:
        float: ratio in [0, 1]
    """
    z = model.encode(inputs).data
    variances = np.linalg.eigvalsh(np.cov(z, rowvar=False))
    return float(max(variances[0], 0.0) / variances[-1])


class MetricReport(object):
    """Mean and sample standard deviation over seeds of each metric

    Args:
        table (pandas.DataFrame): Columns method, setting, metric, dataset, mean, std and count.
            std is NaN when fewer than 2 seeds were aggregated.

    """

    def __init__(self, table):
        self.table = table

    def __len__(self):
        return len(self.table)

    def row(self, metric, dataset):
        rows = self.table[(self.table['metric'] == metric) & (self.table['dataset'] == dataset)]
        if len(rows) != 1:
            raise KeyError((metric, dataset))
        return rows.iloc[0]

    def mean(self, metric, dataset):
        return float(self.row(metric, dataset)['mean'])

    def std(self, metric, dataset):
        """Sample standard deviation or None when fewer than 2 seeds"""
        value = self.row(metric, dataset)['std']
        return None if pd.isnull(value) else float(value)

    def to_dict(self):
        """Nested dict keyed by metric then dataset, std omitted when undefined"""
        summary = {}
        for _, row in self.table.iterrows():
            entry = {'mean': float(row['mean']), 'count': int(row['count'])}
            if not pd.isnull(row['std']):
                entry['std'] = float(row['std'])
            summary.setdefault(row['metric'], {})[row['dataset']] = entry
        return summary

    def format(self, metric, dataset, scale=100.0):
        return format_report(self.mean(metric, dataset), self.std(metric, dataset), scale)


def aggregate(reports):
    """Aggregate per seed results

    Args:
        reports (list[pandas.DataFrame]|pandas.DataFrame): Long format results of one or more seeds

    Returns:
        MetricReport: mean and sample std (n - 1 denominator) per method, setting, metric and dataset
    """
    if isinstance(reports, pd.DataFrame):
        results = reports
    else:
        results = pd.concat(list(reports), ignore_index=True)
    if len(results) == 0:
        raise ShapeError('Nothing to aggregate')
    grouped = results.groupby(['method', 'setting', 'metric', 'dataset'], sort=False)['value']
    table = grouped.agg(['mean', 'count']).reset_index()
    table['std'] = grouped.std(ddof=1).values
    table.loc[table['count'] < 2, 'std'] = np.nan
    return MetricReport(table[['method', 'setting', 'metric', 'dataset', 'mean', 'std', 'count']])


def format_report(mean, std=None, scale=100.0):
    """Render mean and std the way tables show them

    Examples:
        >>> format_report(0.7112, 0.0018)
        '71.12 ± 0.18'

    Args:
        mean (float): Mean
        std (float): Standard deviation, None to omit
        scale (float): Factor applied to both

    Returns:
        str: rendered value
    """
    if std is None or pd.isnull(std):
        return '{0:.2f}'.format(mean * scale)
    return '{0:.2f} ± {1:.2f}'.format(mean * scale, std * scale)


def _rows(method, setting, seed, dataset, metrics):
    return [(method, setting, seed, metric, dataset, value) for metric, value in metrics]


def evaluate_model(model, test, ood_sets=(), method='dum', setting='default', seed=0, labelled_ood=()):
    """Evaluate a trained model on in-distribution test data and out-of-distribution sets

    Computes accuracy and Brier score on test, the AUROC of each available uncertainty kind
    for every OOD set and, for the labelled shifted sets, accuracy and Brier score (OOD generalization).

    Args:
        model (dumlab.model.DumModel): Trained model
        test (dumlab.data.Dataset): In-distribution test set
        ood_sets (list[dumlab.data.Dataset]): Sets to detect
        method (str): Name of method, like natpn or due
        setting (str): Name of setting
        seed (int): Seed
        labelled_ood (list[str]): Names of OOD sets whose labels are meaningful

    Returns:
        pandas.DataFrame: long format results
    """
    with no_grad():
        id_scores = model.predict(test.inputs)
    rows = _rows(method, setting, seed, test.name, [
        ('accuracy', accuracy(id_scores.predicted_label, test.labels)),
        ('brier', brier(id_scores.probs, test.labels)),
    ])
    for ood in ood_sets:
        with no_grad():
            ood_scores = model.predict(ood.inputs)
        metrics = []
        for kind, id_values in id_scores.available():
            metrics.append(('auroc_' + kind, auroc(id_values, getattr(ood_scores, kind))))
        if ood.name in labelled_ood:
            metrics.append(('accuracy', accuracy(ood_scores.predicted_label, ood.labels)))
            metrics.append(('brier', brier(ood_scores.probs, ood.labels)))
        rows.extend(_rows(method, setting, seed, ood.name, metrics))
    return pd.DataFrame(rows, columns=RESULT_COLUMNS)
