"""Model persistence: one self-describing JSON container for every model.

Floats are written with shortest-round-trip precision, so save/load is
bit-exact.
"""

import json

from .baselines import GeometricVelocityModel, PhaseVelocityModel
from .gbr import GaussianBranchingRegressor
from .mixture import GaussianMixtureEM
from .validation import ValidationError

FORMAT = "motilearn-model/1"

_LOADERS = {
    "gmm": GaussianMixtureEM.from_dict,
    "gbr": GaussianBranchingRegressor.from_dict,
    "geometric": GeometricVelocityModel.from_dict,
    "phase": PhaseVelocityModel.from_dict,
}


def model_to_document(model):
    doc = model.to_dict()
    if doc.get("kind") not in _LOADERS:
        raise ValidationError(f"unknown model kind {doc.get('kind')!r}")
    return {"format": FORMAT, **doc}


def model_from_document(doc):
    if doc.get("format") != FORMAT:
        raise ValidationError(f"unsupported model format {doc.get('format')!r}")
    kind = doc.get("kind")
    if kind not in _LOADERS:
        raise ValidationError(f"unknown model kind {kind!r}")
    return _LOADERS[kind](doc)


def save_model(model, path):
    with open(path, "w") as fh:
        json.dump(model_to_document(model), fh, indent=1)
        fh.write("\n")


def load_model(path):
    with open(path) as fh:
        return model_from_document(json.load(fh))
