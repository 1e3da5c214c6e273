from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from lesionxfer.data import (TASK1, TASK2, Dataset, Diagnosis, LesionRecord, Sex, binary_label, class_counts,
                             class_prevalence, get_task, labels, load_ground_truth, load_metadata, write_ground_truth,
                             write_metadata)
from lesionxfer.errors import ConsistencyError, DataError, ParseError


def gt_file(tmp_path, rows, header="image_id,melanoma,seborrheic_keratosis", newline="\n"):
    path = tmp_path / "gt.csv"
    path.write_bytes((newline.join([header, *rows]) + newline).encode())
    return path


def test_indicator_rows_map_to_diagnoses(tmp_path):
    ds = load_ground_truth(gt_file(tmp_path, ["img_007,0.0,0.0", "img_003,1.0,0.0", "img_005,0.0,1.0"]))
    assert [r.image_id for r in ds] == ["img_003", "img_005", "img_007"]
    assert [r.diagnosis for r in ds] == [Diagnosis.MELANOMA, Diagnosis.SEBORRHEIC_KERATOSIS, Diagnosis.NEVUS]


def test_crlf_files_are_accepted(tmp_path):
    ds = load_ground_truth(gt_file(tmp_path, ["a,1.0,0.0", "b,0.0,0.0"], newline="\r\n"))
    assert len(ds) == 2


def test_both_indicators_set_is_a_consistency_error(tmp_path):
    with pytest.raises(ConsistencyError):
        load_ground_truth(gt_file(tmp_path, ["img_009,1.0,1.0"]))


@pytest.mark.parametrize("row", ["img_1,0.5,0.0", "img_1,yes,0.0", "img_1,1.0", "img_1,1.0,0.0,extra"])
def test_malformed_rows_report_line_numbers(tmp_path, row):
    with pytest.raises(ParseError, match=r":3:"):
        load_ground_truth(gt_file(tmp_path, ["img_0,0.0,0.0", row]))


def test_duplicate_ids_rejected(tmp_path):
    with pytest.raises(DataError, match="duplicate"):
        load_ground_truth(gt_file(tmp_path, ["a,0.0,0.0", "a,1.0,0.0"]))


def test_wrong_header_rejected(tmp_path):
    with pytest.raises(ParseError):
        load_ground_truth(gt_file(tmp_path, ["a,0.0,0.0"], header="id,mel,sk"))


def make_dataset(diagnoses):
    return Dataset(tuple(LesionRecord(f"img_{i:03d}", Path(f"img_{i:03d}.jpg"), d) for i, d in enumerate(diagnoses)))


def test_metadata_merge_and_defaults(tmp_path):
    ds = make_dataset([Diagnosis.MELANOMA, Diagnosis.NEVUS])
    path = tmp_path / "meta.csv"
    path.write_text("image_id,age_approximate,sex\nimg_000,55,male\nzzz,40,female\n")
    merged = load_metadata(ds, path)
    a, b = list(merged)
    assert (a.age_years, a.sex) == (55.0, Sex.MALE)
    assert (b.age_years, b.sex) == (None, Sex.UNKNOWN)


@pytest.mark.parametrize("age", ["-5", "131", "old"])
def test_bad_ages_are_parse_errors(tmp_path, age):
    path = tmp_path / "meta.csv"
    path.write_text(f"image_id,age_approximate,sex\nimg_000,{age},male\n")
    with pytest.raises(ParseError):
        load_metadata(make_dataset([Diagnosis.NEVUS]), path)


def test_unknown_age_token_means_absent(tmp_path):
    path = tmp_path / "meta.csv"
    path.write_text("image_id,age_approximate,sex\nimg_000,unknown,\n")
    rec = next(iter(load_metadata(make_dataset([Diagnosis.NEVUS]), path)))
    assert rec.age_years is None and rec.sex == Sex.UNKNOWN


def test_binary_labels_per_task():
    mel = LesionRecord("m", Path("m.jpg"), Diagnosis.MELANOMA)
    nev = LesionRecord("n", Path("n.jpg"), Diagnosis.NEVUS)
    sk = LesionRecord("s", Path("s.jpg"), Diagnosis.SEBORRHEIC_KERATOSIS)
    assert binary_label(mel, TASK1) == 1
    assert binary_label(mel, TASK2) == 0
    assert binary_label(nev, TASK1) == 0
    assert binary_label(sk, TASK2) == 1
    assert get_task("task2") is TASK2


def test_prevalence_examples():
    ds = make_dataset([Diagnosis.MELANOMA] * 19 + [Diagnosis.NEVUS] * 81)
    assert class_prevalence(ds, TASK1) == 0.19
    ds = make_dataset([Diagnosis.SEBORRHEIC_KERATOSIS] * 13 + [Diagnosis.NEVUS] * 87)
    assert class_prevalence(ds, TASK2) == 0.13
    assert class_prevalence(make_dataset([Diagnosis.NEVUS] * 5), TASK1) == 0.0
    with pytest.raises(DataError):
        class_prevalence(make_dataset([]), TASK1)


def test_record_invariants():
    with pytest.raises(ValueError):
        LesionRecord("", Path("x.jpg"), Diagnosis.NEVUS)
    with pytest.raises(ValueError):
        LesionRecord("x", Path("x.jpg"), Diagnosis.NEVUS, age_years=200)


diagnoses = st.lists(st.sampled_from(list(Diagnosis)), max_size=60)


@given(diagnoses)
def test_label_sum_equals_prevalence_times_size(diags):
    ds = make_dataset(diags)
    counts = class_counts(ds)
    assert sum(counts.values()) == len(ds)
    if diags:
        for task in (TASK1, TASK2):
            assert sum(labels(ds, task)) == round(class_prevalence(ds, task) * len(ds))


@given(diagnoses, st.lists(st.tuples(st.one_of(st.none(), st.integers(0, 130)),
                                     st.sampled_from(list(Sex))), min_size=60, max_size=60))
def test_ground_truth_and_metadata_round_trip(tmp_path_factory, diags, meta):
    root = tmp_path_factory.mktemp("rt")
    ds = Dataset(tuple(LesionRecord(f"img_{i:03d}", root / f"img_{i:03d}.jpg", d,
                                    None if meta[i][0] is None else float(meta[i][0]), meta[i][1])
                       for i, d in enumerate(diags)))
    write_ground_truth(ds, root / "gt.csv")
    write_metadata(ds, root / "meta.csv")
    back = load_metadata(load_ground_truth(root / "gt.csv", root), root / "meta.csv")
    assert list(back) == list(ds)
