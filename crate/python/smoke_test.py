#!/usr/bin/env python3
"""Build the vlmkit_py extension module and drive its main entry points."""

import json
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def build_module() -> Path:
    subprocess.run(
        ["cargo", "build", "-p", "vlmkit-py"],
        cwd=ROOT,
        check=True,
    )
    built = ROOT / "target" / "debug" / "libvlmkit_py.so"
    if not built.exists():  # e.g. macOS
        built = ROOT / "target" / "debug" / "libvlmkit_py.dylib"
    stage = Path(tempfile.mkdtemp(prefix="vlmkit-py-"))
    shutil.copy(built, stage / "vlmkit_py.so")
    return stage


def main() -> int:
    sys.path.insert(0, str(build_module()))
    import vlmkit_py as vk

    plan = json.loads(
        vk.plan_patches(1920, 1080, "dynamic_res", min_patches=256, max_patches=3600)
    )
    assert plan["grid"] == [80, 45], plan["grid"]
    assert plan["token_count"] == 3600
    print("PASS plan_patches: 1920x1080 -> grid 80x45, 3600 tokens")

    tile_plan = vk.plan_patches(384, 384, "dynamic_s2", max_tokens=2048)
    layout = json.loads(vk.assemble_sequence(9, f"[{tile_plan}]"))
    assert layout["total_len"] == 587, layout
    assert layout["visual_spans"][0]["length"] == 576
    print("PASS assemble_sequence: 9 text + one 576-token image -> 587")

    verdict = json.loads(vk.majority_vote(["12", "12.0", " 12 "], 0.5))
    assert verdict["verdict"] == "verified", verdict
    print("PASS majority_vote: normalized 12s agree")

    record = {
        "id": "r1",
        "images": [],
        "conversations": [{"role": "user", "text": "2+2?"}],
        "mode": "reason",
        "think": "adding",
        "final": "Answer: 4",
    }
    wire = vk.render_sample(json.dumps(record))
    parsed = json.loads(vk.parse_transcript(wire))
    assert parsed["mode"] == "reason" and parsed["final_text"] == "Answer: 4", parsed
    assert parsed["issues"] == []
    print("PASS transcript: render -> parse round trip")

    broken = dict(record, think="scratch work\nAnswer: 4", final="")
    issues = json.loads(vk.lint_record(json.dumps(broken)))
    assert any(i["code"] == "answer_in_think" for i in issues), issues
    repaired = json.loads(vk.repair_record(json.dumps(broken)))
    assert repaired["record"]["final"] == "Answer: 4", repaired
    print("PASS lint/repair: answer pulled out of think")

    score, flagged = vk.score_sample("point_in_box", "(0.5, 0.5)", "0.4,0.4,0.2,0.2")
    assert (score, flagged) == (1, False)
    score, flagged = vk.score_sample("relaxed_numeric", "roughly 101", "100")
    assert (score, flagged) == (1, False)
    print("PASS score_sample: grounding and numeric rules")

    points = [
        {"label": "a", "cost": 1.0, "accuracy": 50.0},
        {"label": "b", "cost": 2.0, "accuracy": 60.0},
        {"label": "c", "cost": 3.0, "accuracy": 55.0},
    ]
    assert vk.compute_pareto(json.dumps(points)) == [0, 1]
    print("PASS compute_pareto: dominated point dropped")

    manifest = json.loads(
        vk.plan_mixture(
            '[[category]]\nname = "general"\nbase_count = 1000000\n'
            '[[category]]\nname = "math"\nbase_count = 150000\nduplication = 3\n'
        )
    )
    assert manifest["total_samples"] == 1_450_000, manifest
    print("PASS plan_mixture: duplication-aware totals")

    caps = json.dumps(
        [{"image": f"img/{i}.png", "caption": f"caption {i}"} for i in range(5)]
    )
    first = vk.synth_scrambled(caps, 7, insert_prob=0.0)
    assert first == vk.synth_scrambled(caps, 7, insert_prob=0.0)
    gold = json.loads(vk.synth_caption_match(caps, 7))["meta"]["gold"]
    assert sorted(gold) == [1, 2, 3, 4, 5], gold
    print("PASS synth: deterministic seeds, bijective gold")

    print("smoke test ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
