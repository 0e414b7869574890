# Copyright 2026 The mofhei Authors
# SPDX-License-Identifier: Apache-2.0

"""End-to-end checks of the mofhei command line: exit codes, the full
pipeline on a synthetic dataset, and the report schema."""

import json
import os
import subprocess
import sys
import tempfile
import unittest

import jsonschema

BIN = os.environ.get("MOFHEI_BIN", "mofhei")
SCHEMA = os.environ.get("MOFHEI_REPORT_SCHEMA", "schemas/report.schema.json")


def run(*args, check=None):
    p = subprocess.run([BIN, *map(str, args)], capture_output=True, text=True, timeout=600)
    if check is not None and p.returncode != check:
        raise AssertionError(f"{args[0]} exited {p.returncode}, wanted {check}\n{p.stderr}")
    return p


class ExitCodes(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        cls.dir = cls.tmp.name
        cls.model = os.path.join(cls.dir, "m.model")
        run("train", "--dataset", "synthetic:blobs", "--arch", "mlp:6", "--samples", 200, "--epochs", 2,
            "--out", cls.model, check=0)

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def write(self, name, text):
        p = os.path.join(self.dir, name)
        with open(p, "w") as f:
            f.write(text)
        return p

    def test_bad_arguments(self):
        self.assertEqual(run().returncode, 2)
        self.assertEqual(run("train", "--bogus").returncode, 2)
        self.assertEqual(run("prune", "--model", self.model).returncode, 2)  # no --out
        self.assertEqual(run("train", "--dataset", "nope", "--out", os.path.join(self.dir, "x")).returncode, 2)
        cfg = self.write("unknown.toml", "[train]\nlearning_rat = 0.1\n")
        self.assertEqual(run("analyze-cost", "--model", self.model, "--config", cfg).returncode, 2)
        self.assertEqual(run("prune", "--model", self.model, "--out", os.path.join(self.dir, "p"),
                             "--sparsity", 1.5).returncode, 2)

    def test_parse_errors(self):
        cfg = self.write("broken.toml", "[train]\nepochs = = 3\n")
        self.assertEqual(run("analyze-cost", "--model", self.model, "--config", cfg).returncode, 3)
        junk = self.write("junk.model", "this is not a model\n")
        self.assertEqual(run("analyze-cost", "--model", junk).returncode, 3)
        with open(self.model) as f:
            text = f.read()
        cut = self.write("cut.model", text[: len(text) // 2])
        self.assertEqual(run("infer-plain", "--model", cut, "--dataset", "synthetic:blobs").returncode, 3)

    def test_depth_budget(self):
        hef = os.path.join(self.dir, "h.model")
        run("make-hefriendly", "--model", self.model, "--out", hef, "--dataset", "synthetic:blobs",
            "--samples", 200, "--epochs", 1, check=0)
        ok = run("analyze-cost", "--model", hef, check=0)
        self.assertIn("depth", ok.stdout)
        cfg = self.write("shallow.toml", "[crypto]\nmax_depth = 2\n")
        self.assertEqual(run("analyze-cost", "--model", hef, "--config", cfg).returncode, 4)
        self.assertEqual(run("infer-he", "--model", hef, "--config", cfg, "--dataset", "synthetic:blobs",
                             "--samples", 200).returncode, 4)

    def test_divergence(self):
        cfg = self.write("hot.toml", "[train]\noptimizer = \"sgd\"\nlearning_rate = 1e200\n")
        p = run("train", "--dataset", "synthetic:linear", "--arch", "mlp:8", "--samples", 200, "--epochs", 3,
                "--config", cfg, "--out", os.path.join(self.dir, "d.model"))
        self.assertEqual(p.returncode, 5, p.stderr)


class Pipeline(unittest.TestCase):
    """train -> make-hefriendly -> prune -> shrink -> infer -> analyze -> report."""

    def test_chain(self):
        with tempfile.TemporaryDirectory() as d:
            path = lambda n: os.path.join(d, n)
            common = ["--dataset", "synthetic:mnist_like", "--samples", 300, "--seed", 3]
            run("train", *common, "--arch", "lenet", "--epochs", 1, "--out", path("orig.model"), check=0)
            run("make-hefriendly", *common, "--epochs", 1, "--model", path("orig.model"),
                "--out", path("hef.model"), check=0)
            run("prune", *common, "--epochs", 2, "--model", path("hef.model"), "--sparsity", 0.5,
                "--steps", 2, "--delta-t", 5, "--out", path("pruned.model"), check=0)
            self.assertTrue(os.path.exists(path("pruned.model.prune.json")))
            run("shrink", *common, "--epochs", 1, "--model", path("pruned.model"), "--out", path("small.model"),
                check=0)

            plain = json.loads(run("infer-plain", *common, "--model", path("small.model"), "--limit", 20,
                                   "--out", path("plain.csv"), check=0).stdout)
            he1 = json.loads(run("infer-he", *common, "--model", path("small.model"), "--limit", 20,
                                 "--workers", 1, "--out", path("he1.csv"), check=0).stdout)
            run("infer-he", *common, "--model", path("small.model"), "--limit", 20, "--workers", 8,
                "--out", path("he8.csv"), check=0)
            self.assertEqual(plain["instances"], 20)
            self.assertAlmostEqual(plain["accuracy"], he1["accuracy"], delta=0.05)
            with open(path("he1.csv")) as a, open(path("he8.csv")) as b:
                self.assertEqual(a.read(), b.read())
            with open(path("plain.csv")) as a, open(path("he1.csv")) as b:
                for ra, rb in zip(a, b):
                    for x, y in zip(ra.split(","), rb.split(",")):
                        self.assertAlmostEqual(float(x), float(y), delta=1e-6)

            run("analyze-cost", "--model", path("small.model"), "--out", path("cost.json"),
                "--csv", path("cost.csv"), check=0)
            with open(path("cost.json")) as f:
                cost = json.load(f)
            self.assertTrue(cost["depth_ok"])
            self.assertEqual(cost["totals"]["ct_ct_mul"], he1["cost"]["totals"]["ct_ct_mul"])

            run("report", "--model", path("hef.model"), "--pruned", path("small.model"),
                "--out", path("report.json"), "--csv", path("report.csv"), check=0)
            with open(path("report.json")) as f:
                report = json.load(f)
            with open(SCHEMA) as f:
                jsonschema.validate(report, json.load(f))
            v = report["variants"][0]
            self.assertGreater(v["heo_reduction"], 0.0)
            self.assertLess(v["heo"], report["baseline"]["heo"])
            self.assertAlmostEqual(v["layer_sparsity"], 0.5)
            with open(path("report.csv")) as f:
                rows = f.read().splitlines()
            self.assertEqual(len(rows), 2 + len(v["layers"]))  # header and total row
            self.assertTrue(rows[-1].split(",")[1] == "total")


if __name__ == "__main__":
    unittest.main(argv=sys.argv[:1], verbosity=2)
