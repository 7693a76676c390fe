"""Uniform dispatch from (method name, parameter dict) to a binary mask."""

import numpy as np

from .errors import ParameterError
from .filters import FrangiParams, frangi_response, normalize_to_8bit, sheet_response, threshold
from .forest import predict_forest
from .geometric import AdaptiveMorphParams, TemplateParams, adaptive_morph, template_match
from .paths import MinimalPathParams, PercolationParams, hessian_percolation, minimal_paths

__all__ = ["segment", "METHODS"]

METHODS = ("sheet", "frangi", "template", "adaptive", "minpath", "hp", "rf")


def _frangi_mask(vol, params):
    fp = FrangiParams(
        sigma_min=params["sigma_min"], sigma_max=params["sigma_max"],
        alpha=params["alpha"], beta=params["beta"], t2=params["t2"],
    )
    return threshold(normalize_to_8bit(frangi_response(vol, fp)), fp.t2)


def segment(vol, method, params, preselect=None, forest=None):
    """Run one segmentation method on a grayvalue volume.

    ``params`` is a plain dict (e.g. a resolved preset).  ``hp`` takes its
    preselection either as an explicit ``preselect`` mask or from the
    ``preselect_frangi`` parameter group; ``rf`` requires a trained
    ``forest``.
    """
    vol = np.asarray(vol, dtype=np.float32)
    if method == "sheet":
        response = sheet_response(
            vol, params["sigma"], rho=params["rho"], delta=params["delta"]
        )
        return threshold(response, params["t1"])
    if method == "frangi":
        return _frangi_mask(vol, params)
    if method == "template":
        return template_match(vol, TemplateParams(
            half_width=params["half_width"], background=params["background"],
            crack=params["crack"], n=params["n"], t4=params["t4"],
        ))
    if method == "adaptive":
        return adaptive_morph(vol, AdaptiveMorphParams(
            sigma=params["sigma"], half_length=params["half_length"],
            n=params["n"], delta_max=params["delta_max"], k=params["k"],
        ))
    if method == "minpath":
        return minimal_paths(vol, MinimalPathParams(ell=params["ell"], t3=params["t3"]))
    if method == "hp":
        if preselect is None:
            if "preselect_frangi" not in params:
                raise ParameterError(
                    "hp needs a preselect mask or preselect_frangi parameters"
                )
            preselect = _frangi_mask(vol, params["preselect_frangi"])
        return hessian_percolation(vol, preselect, PercolationParams(
            epsilon=params["epsilon"], window=params["window"],
            f=params["f"], tau=params["tau"],
        ))
    if method == "rf":
        if forest is None:
            raise ParameterError("rf needs a trained forest")
        return predict_forest(forest, vol)
    raise ParameterError(f"unknown method {method!r}")
