import subprocess
import sys

import numpy as np
import pytest

from demixeval.analysis import MetricTable, metric_table_to_csv
from demixeval.audio_io import StemKind, Waveform, load_manifest, read_wav, write_wav
from demixeval.cli import run
from demixeval.metrics import MetricId
from demixeval.synth import make_dataset


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli_dataset")
    manifest = make_dataset(
        root, n_songs=4, duration=0.6, sample_rate=4000, seed=2, demo_song_indices=(3,)
    )
    return manifest


@pytest.fixture(scope="module")
def baseline_submission(dataset, tmp_path_factory):
    root = tmp_path_factory.mktemp("cli_baseline")
    manifest = load_manifest(dataset)
    for entry in manifest.songs:
        song_dir = root / entry.song_id
        song_dir.mkdir()
        mixture = read_wav(entry.mixture_path)
        for kind in StemKind:
            write_wav(mixture, song_dir / f"{kind.value}.wav")
    return root


def test_usage_error_exits_2(capsys):
    assert run(["score", "--bogus-flag"]) == 2
    assert run(["not-a-command"]) == 2


def test_help_exits_0(capsys):
    assert run(["--help"]) == 0
    out = capsys.readouterr().out
    assert "validate" in out and "oracle" in out


def test_module_entry_point():
    result = subprocess.run(
        [sys.executable, "-m", "demixeval", "--help"], capture_output=True, text=True
    )
    assert result.returncode == 0
    assert "demixeval" in result.stdout


def test_validate_passes_on_synthetic(dataset, capsys):
    assert run(["validate", "--manifest", str(dataset)]) == 0
    out = capsys.readouterr().out
    assert "# command = validate" in out
    assert out.count("PASS") == 4


def test_validate_fails_on_broken_stem(dataset, tmp_path, capsys):
    import shutil

    broken_root = tmp_path / "broken"
    shutil.copytree(dataset.parent, broken_root)
    victim = broken_root / "syn_000" / "drums.wav"
    truncated = read_wav(victim)
    write_wav(
        Waveform(truncated.samples[:, :-10], truncated.sample_rate), victim
    )
    assert run(["validate", "--manifest", str(broken_root / "manifest.json")]) == 1
    out = capsys.readouterr().out
    assert "FAIL" in out


def test_plan_deterministic(dataset, capsys):
    assert run(["plan", "--manifest", str(dataset), "--seed", "9"]) == 0
    first = capsys.readouterr().out
    assert run(["plan", "--manifest", str(dataset), "--seed", "9"]) == 0
    second = capsys.readouterr().out
    assert first == second
    assert "song_id,round" in first
    assert "syn_003" not in first.split("song_id,round")[1]  # demo song not planned


def test_score_writes_artifacts_and_is_reproducible(
    dataset, baseline_submission, tmp_path, capsys
):
    args = [
        "score",
        "--manifest", str(dataset),
        "--estimates", str(baseline_submission),
        "--system", "baseline",
        "--leaderboard", "B",
        "--training-data", "none",
        "--seed", "4",
        "--jobs", "1",
        "--out", str(tmp_path / "baseline_scores"),
    ]
    assert run(args) == 0
    first = capsys.readouterr().out
    assert (tmp_path / "baseline_scores.csv").is_file()
    assert (tmp_path / "baseline_scores.json").is_file()
    assert run(args) == 0
    second = capsys.readouterr().out
    assert first == second
    assert "system_id,song_id" in first
    assert first.count("baseline,syn_") == 3  # demo song left out


def test_score_missing_estimates_exits_1(dataset, tmp_path, capsys):
    code = run(
        [
            "score",
            "--manifest", str(dataset),
            "--estimates", str(tmp_path / "nowhere"),
            "--system", "ghost",
            "--leaderboard", "B",
            "--jobs", "1",
        ]
    )
    assert code == 1
    assert "missing" in capsys.readouterr().err


def test_score_board_a_rejects_bad_declaration(dataset, baseline_submission, capsys):
    code = run(
        [
            "score",
            "--manifest", str(dataset),
            "--estimates", str(baseline_submission),
            "--system", "cheater",
            "--leaderboard", "A",
            "--training-data", "MUSDB18-HQ plus my private stems",
            "--jobs", "1",
        ]
    )
    assert code == 1
    assert "leaderboard A" in capsys.readouterr().err


def test_oracle_then_score_matches_baseline(dataset, baseline_submission, tmp_path, capsys):
    oracle_root = tmp_path / "oracle_base"
    assert (
        run(
            [
                "oracle",
                "--manifest", str(dataset),
                "--kind", "baseline",
                "--out", str(oracle_root),
                "--jobs", "1",
            ]
        )
        == 0
    )
    capsys.readouterr()
    common = [
        "--manifest", str(dataset),
        "--leaderboard", "B",
        "--training-data", "none",
        "--seed", "4",
        "--jobs", "1",
    ]
    assert run(["score", "--estimates", str(oracle_root), "--system", "x", *common]) == 0
    from_oracle = capsys.readouterr().out.split("\n")
    assert (
        run(["score", "--estimates", str(baseline_submission), "--system", "x", *common])
        == 0
    )
    from_copies = capsys.readouterr().out.split("\n")
    # identical numbers apart from the config line naming the estimates dir
    assert [l for l in from_oracle if not l.startswith("#")] == [
        l for l in from_copies if not l.startswith("#")
    ]


def test_rank_from_score_files(dataset, baseline_submission, tmp_path, capsys):
    swf_root = tmp_path / "swf"
    assert (
        run(
            [
                "oracle",
                "--manifest", str(dataset),
                "--kind", "swf",
                "--out", str(swf_root),
                "--fft", "512",
                "--hop", "128",
                "--jobs", "1",
            ]
        )
        == 0
    )
    capsys.readouterr()
    for system, estimates in (("oracle_swf", swf_root), ("baseline", baseline_submission)):
        assert (
            run(
                [
                    "score",
                    "--manifest", str(dataset),
                    "--estimates", str(estimates),
                    "--system", system,
                    "--leaderboard", "B",
                    "--training-data", "none",
                    "--seed", "4",
                    "--jobs", "1",
                    "--out", str(tmp_path / f"{system}_scores"),
                ]
            )
            == 0
        )
    capsys.readouterr()
    assert (
        run(
            [
                "rank",
                "--scores",
                str(tmp_path / "oracle_swf_scores.json"),
                str(tmp_path / "baseline_scores.json"),
            ]
        )
        == 0
    )
    out = capsys.readouterr().out
    lines = [l for l in out.split("\n") if l and not l.startswith("#")]
    assert lines[0].startswith("rank,system_id")
    assert lines[1].startswith("1,oracle_swf")
    assert lines[2].startswith("2,baseline")


def test_rank_rejects_mixed_leaderboards(dataset, baseline_submission, tmp_path, capsys):
    for system, board in (("sys_a", "A"), ("sys_b", "B")):
        declaration = "MUSDB18-HQ" if board == "A" else "none"
        assert (
            run(
                [
                    "score",
                    "--manifest", str(dataset),
                    "--estimates", str(baseline_submission),
                    "--system", system,
                    "--leaderboard", board,
                    "--training-data", declaration,
                    "--seed", "4",
                    "--jobs", "1",
                    "--out", str(tmp_path / system),
                ]
            )
            == 0
        )
    capsys.readouterr()
    code = run(
        [
            "rank",
            "--scores", str(tmp_path / "sys_a.json"), str(tmp_path / "sys_b.json"),
        ]
    )
    assert code == 1
    assert "mix leaderboards" in capsys.readouterr().err


def test_suite_identical_files(dataset, tmp_path, capsys):
    manifest = load_manifest(dataset)
    reference = manifest.songs[0].stem_paths[StemKind.VOCALS]
    assert (
        run(["suite", "--reference", str(reference), "--estimate", str(reference)]) == 0
    )
    out = capsys.readouterr().out
    lines = dict(
        line.split(",", 1) for line in out.strip().split("\n") if not line.startswith("#") and "," in line
    )
    assert float(lines["global_mae"]) == 0.0
    assert float(lines["global_mse"]) == 0.0
    assert float(lines["global_si_sdr"]) == 120.0
    energy = float(np.sum(read_wav(reference).samples ** 2))
    expected = 10 * np.log10((energy + 1e-7) / 1e-7)
    assert float(lines["global_sdr"]) == pytest.approx(expected, rel=1e-5)
    # 30 s frames do not fit in a short song: absent, rendered as empty
    assert lines["bsseval_v3_framewise_sdr_mean"] == ""


def test_suite_byte_identical(dataset, capsys):
    manifest = load_manifest(dataset)
    reference = str(manifest.songs[0].stem_paths[StemKind.BASS])
    estimate = str(manifest.songs[0].stem_paths[StemKind.DRUMS])
    assert run(["suite", "--reference", reference, "--estimate", estimate]) == 0
    first = capsys.readouterr().out
    assert run(["suite", "--reference", reference, "--estimate", estimate]) == 0
    assert capsys.readouterr().out == first


def test_analyze_table(tmp_path, rng, capsys):
    table = MetricTable(columns=(MetricId.GLOBAL_SDR, MetricId.BSSEVAL_V3_SDR))
    for i in range(12):
        value = float(rng.standard_normal())
        table.add_row(
            ("sys", f"song{i}", "bass"),
            {
                MetricId.GLOBAL_SDR: value,
                MetricId.BSSEVAL_V3_SDR: value + 1e-6 * float(rng.standard_normal()),
            },
        )
    path = tmp_path / "table.csv"
    path.write_text(metric_table_to_csv(table))
    assert run(["analyze", "--table", str(path), "--kind", "pearson"]) == 0
    out = capsys.readouterr().out
    assert "metric,global_sdr,bsseval_v3_sdr" in out
    assert "no defined pair falls below the threshold" in out
    assert run(["analyze", "--table", str(path), "--kind", "spearman"]) == 0


def test_score_parallel_jobs_match_serial(dataset, baseline_submission, tmp_path, capsys):
    common = [
        "score",
        "--manifest", str(dataset),
        "--estimates", str(baseline_submission),
        "--system", "baseline",
        "--leaderboard", "B",
        "--training-data", "none",
        "--seed", "4",
    ]
    assert run([*common, "--jobs", "1"]) == 0
    serial = [
        l for l in capsys.readouterr().out.split("\n") if not l.startswith("#")
    ]
    assert run([*common, "--jobs", "2"]) == 0
    parallel = [
        l for l in capsys.readouterr().out.split("\n") if not l.startswith("#")
    ]
    assert serial == parallel
