"""Behaviour of the session-trained classifiers on fresh archetype draws."""
import numpy as np
import pytest

from icascope import synthgen as S
from icascope.framework import classify
from icascope.nn.network import grad_cam, predict
from icascope.topomap import render_topoplot


def topoplot(archetype, seed):
    w, _ = S.gen_weights(S.ArchetypeParams(archetype, seed=seed))
    return render_topoplot(w)


@pytest.mark.parametrize("archetype,category", [("BEOG", "B_V"), ("HEOG", "H_E"), ("EMG", "E_I")])
def test_fresh_archetype_is_positive(trained, archetype, category):
    model = trained[category][0]
    hits = sum(predict(model, topoplot(archetype, 10_000 + s).as_input())[0] == "positive"
               for s in range(20))
    assert hits >= 19


def test_fresh_ubs_is_ubs(registry):
    verdicts = [classify(registry, topoplot("UBS", 20_000 + s).as_input()).is_ubs for s in range(20)]
    assert sum(verdicts) >= 19


def test_grad_cam_sign_follows_verdict(trained):
    # the last B_V feature map is 2x2, too coarse to localize, but the net
    # evidence over the disk must still agree with the decision
    model = trained["B_V"][0]
    for archetype, sign in (("BEOG", 1), ("VEOG", 1), ("UBS", -1), ("HEOG", -1)):
        for s in range(3):
            t = topoplot(archetype, 30_000 + s)
            cam = grad_cam(model, t.as_input())
            assert np.sign(cam[t.mask].mean()) == sign, (archetype, s)
