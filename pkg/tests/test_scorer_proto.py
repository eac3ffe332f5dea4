import io
import json
import sys

import numpy as np
import pytest

from cambench.causal import SyntheticScorer
from cambench.errors import ScorerProtocolError
from cambench.scorer_proto import (HANDSHAKE, ExternalScorer, decode_pixels,
                                   encode_pixels, run_conformance, serve)

SERVE_CMD = [sys.executable, "-m", "cambench.cli", "score-serve"]


class TestPixelCodec:
    def test_roundtrip(self):
        rng = np.random.default_rng(0)
        image = rng.random((9, 13)).astype(np.float32)
        back = decode_pixels(encode_pixels(image), 9, 13)
        assert np.array_equal(back.astype(np.float32), image)

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            decode_pixels(encode_pixels(np.zeros((2, 2))), 3, 3)


class TestServeLoop:
    def run_serve(self, lines):
        fin = io.StringIO("".join(line + "\n" for line in lines))
        fout = io.StringIO()
        ferr = io.StringIO()
        serve(lambda img: float(img.sum()), fin=fin, fout=fout, ferr=ferr)
        out = [json.loads(l) for l in fout.getvalue().splitlines()]
        return out, ferr.getvalue()

    def test_handshake_first(self):
        out, _ = self.run_serve([])
        assert out == [HANDSHAKE]

    def test_id_echo_and_logit(self):
        image = np.full((2, 3), 0.5)
        req = {"id": 41, "h": 2, "w": 3, "pixels_b64": encode_pixels(image)}
        out, _ = self.run_serve([json.dumps(req)])
        assert out[1]["id"] == 41
        assert out[1]["logit"] == pytest.approx(3.0)

    def test_unparseable_line_skipped(self):
        out, err = self.run_serve(["this is not json"])
        assert len(out) == 1  # handshake only
        assert "skipping" in err

    def test_bad_request_with_id_gets_error(self):
        out, _ = self.run_serve([json.dumps({"id": 7, "h": 2, "w": 2,
                                             "pixels_b64": "!!!"})])
        assert out[1]["id"] == 7
        assert "error" in out[1]

    def test_request_without_id_skipped(self):
        out, err = self.run_serve([json.dumps({"h": 2, "w": 2,
                                               "pixels_b64": ""})])
        assert len(out) == 1
        assert "skipping" in err


class TestExternalScorer:
    def test_score_matches_local(self):
        rng = np.random.default_rng(1)
        image = rng.random((32, 32))
        local = SyntheticScorer()(image)
        with ExternalScorer(SERVE_CMD) as scorer:
            remote = scorer(image)
        assert remote == pytest.approx(local, rel=1e-6)

    def test_bad_handshake_rejected(self):
        cmd = [sys.executable, "-c", "print('{\"protocol\": \"other\"}')"]
        with pytest.raises(ScorerProtocolError):
            ExternalScorer(cmd)


class TestConformance:
    def test_builtin_serve_passes(self):
        report = run_conformance(SERVE_CMD, n_requests=40, seed=3,
                                 reference=SyntheticScorer())
        assert report["handshake_ok"]
        assert report["n_ok"] == 40
        assert report["mismatches"] == []

    def test_catches_id_mangling(self):
        # a scorer that answers with wrong ids must fail conformance
        bad = (
            "import sys, json\n"
            "print(json.dumps({'protocol': 'cbqr-scorer', 'version': 1}), flush=True)\n"
            "for line in sys.stdin:\n"
            "    msg = json.loads(line)\n"
            "    print(json.dumps({'id': msg['id'] + 1, 'logit': 0.0}), flush=True)\n"
        )
        report = run_conformance([sys.executable, "-c", bad], n_requests=3,
                                 seed=0)
        assert report["mismatches"]
