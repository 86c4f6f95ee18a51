import json
from datetime import date, timedelta

import numpy as np
import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from cpoint.bundle import ModelStore, bundle_from_json, make_bundle
from cpoint.cli import main
from cpoint.frontier import select
from cpoint.pipeline import compile_bundle
from cpoint.service import create_app

MODEL_SRC = """\
all = {AAA, BBB, CCC};
normal: sum[all] $ == 1;
caps: for[all] $ <= 0.8;
"""

MOMENTS_SRC = """\
all={AAA,BBB,CCC};

er[all]={5.000000e-002@AAA, 1.200000e-001@BBB, 2.200000e-001@CCC};

std[all]={1.500000e-001@AAA, 2.500000e-001@BBB, 4.000000e-001@CCC};

Hurst=0.5;
extrap=30;
sample=90;
"""

CORREL_SRC = """\
AAA BBB CCC
1.0 0.2 0.1
0.2 1.0 0.3
0.1 0.3 1.0
"""

DERIV_SRC = """\
call={OPTC@AAA};
exdays={30@OPTC};
O={0.08@OPTC};
S={1.0@OPTC};
K={1.02@OPTC};
"""


@pytest.fixture()
def inputs(tmp_path):
    model = tmp_path / "MODEL.CP"
    model.write_text(MODEL_SRC)
    moments = tmp_path / "MODPS.CP"
    moments.write_text(MOMENTS_SRC)
    correl = tmp_path / "CORREL.M"
    correl.write_text(CORREL_SRC)
    deriv = tmp_path / "DERIV.CP"
    deriv.write_text(DERIV_SRC)
    return tmp_path


def write_quotes(dirpath, asset, prices, start):
    rows = [
        f"{(start + timedelta(days=i)).strftime('%d/%m/%y')}    {p:.4E}"
        for i, p in enumerate(prices)
    ][::-1]
    text = (f"Asset: {asset}\nDeflator: DOLOF.OFC\nShares: 1E+0\nDate  Price\n"
            + "\n".join(rows) + "\n*\n")
    (dirpath / f"{asset}.ofc").write_text(text)


class TestFilterCommand:
    def test_constant_prices_give_zero_moments(self, tmp_path):
        start = date(2020, 1, 1)
        write_quotes(tmp_path, "AST1", [5.0] * 30, start)
        write_quotes(tmp_path, "AST2", [7.0] * 30, start)
        out_m = tmp_path / "FILTER.CP"
        out_c = tmp_path / "CORRELF.M"
        result = CliRunner().invoke(main, [
            "filter", "--data-dir", str(tmp_path),
            "--final-date", (start + timedelta(days=20)).isoformat(),
            "--interval", "1", "--samples", "20",
            "--out-moments", str(out_m), "--out-correl", str(out_c),
        ])
        assert result.exit_code == 0, result.output
        from cpoint.files import moments_from_files
        ms, params = moments_from_files(out_m.read_text(), out_c.read_text())
        assert np.allclose(ms.er, 0.0)
        assert np.allclose(ms.std, 0.0)
        assert np.allclose(ms.correl, np.eye(2))
        assert params["extrap"] == 30.0

    def test_insufficient_samples_nonzero_exit(self, tmp_path):
        write_quotes(tmp_path, "AST1", [5.0] * 10, date(2020, 1, 1))
        result = CliRunner().invoke(main, [
            "filter", "--data-dir", str(tmp_path),
            "--final-date", "2020-01-05", "--samples", "1",
            "--out-moments", str(tmp_path / "m"), "--out-correl", str(tmp_path / "c"),
        ])
        assert result.exit_code != 0
        assert "InsufficientSamples" in result.output

    def test_missing_quote_nonzero_exit(self, tmp_path):
        write_quotes(tmp_path, "AST1", [5.0] * 10, date(2020, 1, 1))
        result = CliRunner().invoke(main, [
            "filter", "--data-dir", str(tmp_path),
            "--final-date", "2021-06-01", "--samples", "20",
            "--out-moments", str(tmp_path / "m"), "--out-correl", str(tmp_path / "c"),
        ])
        assert result.exit_code != 0
        assert "MissingQuote" in result.output


class TestCompileCommand:
    def test_compile_and_bundle_round_trip(self, inputs):
        out = inputs / "bundle.json"
        result = CliRunner().invoke(main, [
            "compile", str(inputs / "MODEL.CP"),
            "--moments", str(inputs / "MODPS.CP"),
            "--correl", str(inputs / "CORREL.M"),
            "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        bundle = bundle_from_json(out.read_text())
        assert bundle.model.names == ["AAA", "BBB", "CCC"]
        assert len(bundle.path.etas) >= 2

    def test_bundle_id_stable_across_runs(self, inputs):
        ids = []
        for name in ("b1.json", "b2.json"):
            out = inputs / name
            result = CliRunner().invoke(main, [
                "compile", str(inputs / "MODEL.CP"),
                "--moments", str(inputs / "MODPS.CP"),
                "--correl", str(inputs / "CORREL.M"),
                "--out", str(out),
            ])
            assert result.exit_code == 0, result.output
            ids.append(json.loads(out.read_text())["id"])
        assert ids[0] == ids[1]

    def test_compile_with_deriv_extends_universe(self, inputs):
        model4 = inputs / "MODEL4.CP"
        model4.write_text("all = {AAA, BBB, CCC, OPTC};\nnormal: sum[all] $ == 1;\n")
        out = inputs / "bundle4.json"
        result = CliRunner().invoke(main, [
            "compile", str(model4),
            "--moments", str(inputs / "MODPS.CP"),
            "--correl", str(inputs / "CORREL.M"),
            "--deriv", str(inputs / "DERIV.CP"),
            "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        bundle = bundle_from_json(out.read_text())
        assert bundle.model.names == ["AAA", "BBB", "CCC", "OPTC"]

    def test_missing_normal_constraint_fails(self, inputs):
        bad = inputs / "BAD.CP"
        bad.write_text("all = {AAA};\ncap: sum[all] $ <= 1;\n")
        result = CliRunner().invoke(main, [
            "compile", str(bad),
            "--moments", str(inputs / "MODPS.CP"),
            "--correl", str(inputs / "CORREL.M"),
            "--out", str(inputs / "x.json"),
        ])
        assert result.exit_code != 0
        assert "MissingNormalConstraint" in result.output


class TestSelectReportCommands:
    @pytest.fixture()
    def bundle_path(self, inputs):
        out = inputs / "bundle.json"
        result = CliRunner().invoke(main, [
            "compile", str(inputs / "MODEL.CP"),
            "--moments", str(inputs / "MODPS.CP"),
            "--correl", str(inputs / "CORREL.M"),
            "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        return out

    def test_select_critical_eta_status(self, bundle_path):
        bundle = bundle_from_json(bundle_path.read_text())
        eta1 = float(bundle.path.etas[min(1, bundle.path.k_max)])
        result = CliRunner().invoke(main, [
            "select", str(bundle_path), "--by", "eta", "--value", str(eta1),
        ])
        assert result.exit_code == 0, result.output
        data = json.loads(result.output)
        assert data["status"] == "critical"
        assert data["glyph"] == "+"

    def test_select_matches_library(self, bundle_path):
        bundle = bundle_from_json(bundle_path.read_text())
        result = CliRunner().invoke(main, [
            "select", str(bundle_path), "--by", "e", "--value", "0.1",
        ])
        data = json.loads(result.output)
        lib = select(bundle.frontier, "e", 0.1)
        assert data["e"] == pytest.approx(lib.e, abs=1e-15)
        assert data["s"] == pytest.approx(lib.s, abs=1e-15)
        assert data["composition"] == pytest.approx(lib.composition)

    def test_report_appends(self, bundle_path, tmp_path):
        out = tmp_path / "REPORT.CP"
        for _ in range(2):
            result = CliRunner().invoke(main, [
                "report", str(bundle_path), "--select", "eta=0.2",
                "--out", str(out),
            ])
            assert result.exit_code == 0, result.output
        text = out.read_text()
        assert text.count("Selected Portfolios") == 2

    def test_frontier_single_point_model(self, inputs, tmp_path):
        one = inputs / "ONE.CP"
        one.write_text("all = {AAA};\nnormal: sum[all] $ == 1;\n")
        out = inputs / "one.json"
        result = CliRunner().invoke(main, [
            "compile", str(one),
            "--moments", str(inputs / "MODPS.CP"),
            "--correl", str(inputs / "CORREL.M"),
            "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        result = CliRunner().invoke(main, ["frontier", str(out)])
        data = json.loads(result.output)
        assert data["segments"] == []
        assert len(data["critical_points"]) == 1
        assert data["critical_points"][0]["composition"] == {"AAA": 1.0}


def post_model(client, deriv=False):
    files = {
        "model": ("MODEL.CP", MODEL_SRC.encode()),
        "moments": ("MODPS.CP", MOMENTS_SRC.encode()),
        "correl": ("CORREL.M", CORREL_SRC.encode()),
    }
    if deriv:
        files["deriv"] = ("DERIV.CP", DERIV_SRC.encode())
    return client.post("/api/models", files=files)


class TestService:
    @pytest.fixture()
    def client(self):
        return TestClient(create_app(ModelStore()))

    def test_healthz(self, client):
        assert client.get("/healthz").json() == {"status": "ok"}

    def test_post_then_frontier_round_trip(self, client):
        r = post_model(client)
        assert r.status_code == 200, r.text
        model_id = r.json()["id"]
        f1 = client.get(f"/api/models/{model_id}/frontier")
        f2 = client.get(f"/api/models/{model_id}/frontier")
        assert f1.status_code == 200
        assert f1.content == f2.content
        body = f1.json()
        assert body["critical_points"]
        assert all("v00" in seg for seg in body["segments"])

    def test_select_matches_cli_byte_for_byte(self, client, inputs):
        r = post_model(client)
        model_id = r.json()["id"]
        svc = client.post(f"/api/models/{model_id}/select",
                          json={"by": "e", "value": 0.1})
        out = inputs / "bundle.json"
        CliRunner().invoke(main, [
            "compile", str(inputs / "MODEL.CP"),
            "--moments", str(inputs / "MODPS.CP"),
            "--correl", str(inputs / "CORREL.M"), "--out", str(out),
        ])
        cli_out = CliRunner().invoke(main, [
            "select", str(out), "--by", "e", "--value", "0.1",
        ]).output.strip()
        assert cli_out.encode() == svc.content
        # and the frontier JSON is canonical on both paths too
        svc_frontier = client.get(f"/api/models/{model_id}/frontier")
        cli_frontier = CliRunner().invoke(main, ["frontier", str(out)]).output.strip()
        assert cli_frontier.encode() == svc_frontier.content

    def test_malformed_mdl_400_with_line(self, client):
        files = {
            "model": ("MODEL.CP", b"all = {AAA};\nbroken @@;"),
            "moments": ("MODPS.CP", MOMENTS_SRC.encode()),
            "correl": ("CORREL.M", CORREL_SRC.encode()),
        }
        r = client.post("/api/models", files=files)
        assert r.status_code == 400
        body = r.json()
        assert body["line"] == 2
        assert "code" in body and "message" in body

    def test_unknown_id_404(self, client):
        assert client.get("/api/models/doesnotexist/frontier").status_code == 404
        assert client.post("/api/models/doesnotexist/select",
                           json={"by": "e", "value": 0.1}).status_code == 404

    def test_strict_out_of_range_422(self, client):
        model_id = post_model(client).json()["id"]
        ok = client.post(f"/api/models/{model_id}/select",
                         json={"by": "e", "value": 99.0})
        assert ok.status_code == 200
        assert ok.json()["status"] == "out_of_range_high"
        strict = client.post(f"/api/models/{model_id}/select",
                             json={"by": "e", "value": 99.0, "strict": True})
        assert strict.status_code == 422

    def test_report_identical_to_cli(self, client, inputs):
        model_id = post_model(client).json()["id"]
        svc_text = client.post(
            f"/api/models/{model_id}/report",
            json={"selections": [{"by": "eta", "value": 0.2}]},
        ).text
        out = inputs / "bundle.json"
        CliRunner().invoke(main, [
            "compile", str(inputs / "MODEL.CP"),
            "--moments", str(inputs / "MODPS.CP"),
            "--correl", str(inputs / "CORREL.M"), "--out", str(out),
        ])
        report_out = inputs / "R.CP"
        cli = CliRunner().invoke(main, [
            "report", str(out), "--select", "eta=0.2", "--out", str(report_out),
        ])
        assert cli.exit_code == 0
        assert report_out.read_text() == svc_text

    def test_deriv_upload(self, client):
        r = post_model(client, deriv=True)
        # the 3-asset model restricts the universe to the fundamentals
        assert r.status_code == 200, r.text
        assert r.json()["assets"] == ["AAA", "BBB", "CCC"]


class TestBundleStore:
    def test_directory_persistence(self, tmp_path):
        out = compile_bundle(MODEL_SRC, MOMENTS_SRC, CORREL_SRC)
        store = ModelStore(tmp_path)
        store.add(out.bundle)
        reloaded = ModelStore(tmp_path)
        assert reloaded.get(out.bundle.id) is not None
        assert reloaded.get(out.bundle.id).model.names == out.bundle.model.names

    def test_verify_rejects_tampered_bundle(self):
        out = compile_bundle(MODEL_SRC, MOMENTS_SRC, CORREL_SRC)
        text = out.bundle.to_json()
        data = json.loads(text)
        data["path"]["returns"][0] = 99.0
        from cpoint.bundle import canonical_dumps
        with pytest.raises(ValueError):
            bundle_from_json(canonical_dumps(data))
