"""End-to-end smoke test for the afss Python bindings.

Builds a tiny synthetic corpus, synthesizes pseudo-fakes, trains the micro
detector for two epochs, evaluates and scores with the best checkpoint, and
cross-checks the metric functions. Exits nonzero on any failure.
"""

import json
import pathlib
import tempfile

import afss

CONFIG = """\
seed = 11

[synthesis]
branch_ratio = 0.5
vc = "identity"

[[synthesis.vocoders]]
[synthesis.vocoders.griffin_lim]
n_mels = 40
iters = 4

[detector]
proj_dim = 4
dropout = 0.5

[detector.front]
n_mels = 8
hidden = 6
d_front = 8
kernel = 3

[training]
max_epochs = 2
warmup_epochs = 1
batch_size = 4
"""


def main() -> None:
    print(f"afss {afss.__version__}")
    assert "[training]" in afss.example_config()
    assert "[training]" in afss.default_config()

    with tempfile.TemporaryDirectory() as tmp:
        root = pathlib.Path(tmp)

        real_manifest = afss.write_demo_corpus(
            str(root / "corpus"),
            n_speakers=3,
            utterances_per_speaker=2,
            duration_secs=0.6,
            seed=41,
        )
        problems = afss.validate_manifest(real_manifest)
        assert problems == [], problems
        print(f"corpus ok: {real_manifest}")

        run_dir = root / "run"
        synth = afss.synthesize(CONFIG, real_manifest, str(run_dir))
        print(synth)
        assert synth.n_real == 6 and synth.n_fake == 6, synth
        assert set(synth.counts) <= {"self_vc", "self_rec"}, synth.counts
        assert afss.validate_manifest(synth.merged_manifest) == []

        trained = afss.train(
            CONFIG,
            synth.merged_manifest,
            synth.merged_manifest,
            str(run_dir),
        )
        print(trained)
        assert trained.epochs_run == 2, trained
        assert len(trained.history) == 2
        for row in trained.history:
            assert 1.0 < row.w_fake < 2.0 and 0.0 < row.w_real < 1.0, row

        # A second call resumes the finished run and trains nothing new.
        resumed = afss.train(
            CONFIG,
            synth.merged_manifest,
            synth.merged_manifest,
            str(run_dir),
        )
        assert resumed.epochs_run == 0, resumed

        evaluation = afss.evaluate(
            trained.best_checkpoint,
            [synth.merged_manifest],
            str(run_dir),
            config=CONFIG,
        )
        print(evaluation.datasets[0])
        assert len(evaluation.datasets) == 1
        assert evaluation.average.eer == evaluation.datasets[0].eer
        doc = json.loads(pathlib.Path(evaluation.evaluation_path).read_text())
        assert {"datasets", "average"} <= set(doc)

        scored = afss.score(
            trained.best_checkpoint,
            real_manifest,
            str(root / "reals.txt"),
        )
        print(scored)
        assert scored.n_scored == 6 and scored.failures == []
        score_lines = pathlib.Path(scored.score_path).read_text().splitlines()
        assert len([l for l in score_lines if l and not l.startswith("#")]) == 6

        # Metric functions against hand-checkable values: perfect separation.
        pairs = [(0.1, 0), (0.2, 0), (0.8, 1), (0.9, 1)]
        eer, threshold = afss.eer(pairs)
        assert eer == 0.0 and 0.2 < threshold <= 0.8, (eer, threshold)
        assert afss.auc(pairs) == 1.0
        assert afss.average_precision(pairs) == 1.0
        # And a single inversion: one fake under one real.
        flipped = [(0.1, 0), (0.8, 0), (0.7, 1), (0.9, 1)]
        assert afss.auc(flipped) == 0.75

        try:
            afss.eer([(0.5, 2)])
        except ValueError as e:
            assert "label" in str(e)
        else:
            raise AssertionError("bad label should raise ValueError")

    print("smoke test passed")


if __name__ == "__main__":
    main()
