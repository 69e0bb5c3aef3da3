mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use common::{context, gaussian_matrix, gaussian_vec};
use nullspace_unlearn::dataio::synthetic::{separability_certificate, DeskSuite};
use nullspace_unlearn::dataio::SuiteConfig;
use nullspace_unlearn::linalg::{dot, l2_normalize, norm, nullspace_projector, Matrix, DEFAULT_RANK_TOL};
use nullspace_unlearn::{
    apply_unlearning, compute_projector, evaluate, unlearn, BankEntry, ForgetContext, RowKind, TextEmbedder,
    TextTable, UnlearnMode, UnlearnOptions, VisualSource,
};
use proptest::prelude::*;

fn desk() -> &'static (DeskSuite, TextEmbedder) {
    static DESK: OnceLock<(DeskSuite, TextEmbedder)> = OnceLock::new();
    DESK.get_or_init(|| {
        let d = SuiteConfig::default().build().unwrap();
        let t = d.suite.manifest.text_embedder().unwrap();
        (d, t)
    })
}

fn photo() -> BTreeSet<String> {
    ["photo".to_string()].into()
}

#[test]
fn default_suite_is_separable_and_accurate_before_unlearning() {
    let (d, text) = desk();
    let m = &d.suite.manifest;
    let cells = separability_certificate(&d.suite.data, &d.projection, &d.suite.prototypes.prototypes, m.domains.len())
        .unwrap();
    assert_eq!(cells.len(), 28);
    assert!(cells.iter().all(|c| c.separable()));
    let bank = nullspace_unlearn::ProjectionBank::untouched(d.projection.clone(), &m.domains);
    let report = evaluate(&d.suite.data, &bank, m, text).unwrap();
    for dom in &report.domains {
        assert!(dom.retain.bf.unwrap() >= 95.0 && dom.forget.bf.unwrap() >= 95.0, "{}", dom.domain);
        assert_eq!(dom.retain.bf, dom.retain.af);
    }
}

#[test]
fn selective_photo_forgets_only_in_photo() {
    let (d, text) = desk();
    let m = &d.suite.manifest;
    let out = unlearn(&context(d, text, UnlearnOptions::default()), &UnlearnMode::SelectiveDomain(photo()), &m.forget_classes)
        .unwrap();
    let report = evaluate(&d.suite.data, &out.bank, m, text).unwrap();
    for dom in &report.domains {
        if dom.domain == "photo" {
            assert!(dom.forget.af.unwrap() <= 5.0);
            assert!(dom.retain.bf.unwrap() - dom.retain.af.unwrap() <= 10.0);
        } else {
            assert_eq!(dom.forget.bf_counts, dom.forget.af_counts);
            assert_eq!(dom.retain.bf_counts, dom.retain.af_counts);
            assert_eq!(out.bank.entry(&dom.domain).unwrap(), &BankEntry::Base);
            assert_eq!(out.bank.effective(&dom.domain).unwrap().data(), d.projection.data());
        }
    }
}

#[test]
fn forget_logits_vanish_for_every_mode() {
    let (d, text) = desk();
    let m = &d.suite.manifest;
    let ctx = context(d, text, UnlearnOptions::default());
    for mode in [
        UnlearnMode::Global,
        UnlearnMode::SelectiveDomain(photo()),
        UnlearnMode::CompleteSelectiveDomain(["sketch".to_string(), "cartoon".to_string()].into()),
        UnlearnMode::TextOnly,
    ] {
        let out = unlearn(&ctx, &mode, &m.forget_classes).unwrap();
        for scoped in &out.matrices {
            for dom in &scoped.domains {
                let wp = out.bank.effective(dom).unwrap();
                for i in (0..d.suite.data.len()).step_by(7) {
                    let f = d.suite.data.features.row(i);
                    let scale = norm(&d.projection.vecmat(f).unwrap());
                    let h = wp.vecmat(f).unwrap();
                    for row in &scoped.matrix.rows {
                        assert!(dot(&h, &row.vector).abs() <= 1e-8 * scale * norm(&row.vector), "{}", mode.label());
                    }
                }
            }
        }
    }
}

#[test]
fn complete_projector_nests_inside_selective() {
    let (d, text) = desk();
    let m = &d.suite.manifest;
    let ctx = context(d, text, UnlearnOptions::default());
    let sel = ctx.build_forget_matrices(&UnlearnMode::SelectiveDomain(photo()), &m.forget_classes).unwrap();
    let com = ctx.build_forget_matrices(&UnlearnMode::CompleteSelectiveDomain(photo()), &m.forget_classes).unwrap();
    assert_eq!(com[0].matrix.count(RowKind::Residual), 3);
    let ps = compute_projector(&sel[0].matrix, DEFAULT_RANK_TOL).unwrap();
    let pc = compute_projector(&com[0].matrix, DEFAULT_RANK_TOL).unwrap();
    assert!(pc.rank_removed() > ps.rank_removed());
    let prod = ps.matrix().matmul(pc.matrix()).unwrap();
    assert!(prod.max_abs_diff(pc.matrix()) <= 1e-9);
}

#[test]
fn text_only_leaves_visual_residual_that_full_projector_removes() {
    let (d, text) = desk();
    let m = &d.suite.manifest;
    let ctx = context(d, text, UnlearnOptions::default());
    let sel = UnlearnMode::SelectiveDomain(photo());
    let full = ctx.build_forget_matrices(&sel, &m.forget_classes).unwrap();
    let text_only = ctx.build_forget_matrices(&UnlearnMode::TextOnly, &m.forget_classes).unwrap();
    let p_full = compute_projector(&full[0].matrix, DEFAULT_RANK_TOL).unwrap();
    let p_text = compute_projector(&text_only[0].matrix, DEFAULT_RANK_TOL).unwrap();
    let visual: Vec<&Vec<f64>> =
        full[0].matrix.rows.iter().filter(|r| r.kind == RowKind::Visual).map(|r| &r.vector).collect();
    let worst_text = visual.iter().map(|h| norm(&p_text.apply(h).unwrap())).fold(0.0, f64::max);
    let worst_full = visual.iter().map(|h| norm(&p_full.apply(h).unwrap())).fold(0.0, f64::max);
    assert!(worst_text > 0.1, "{worst_text}");
    assert!(worst_full <= 1e-8, "{worst_full}");
}

#[test]
fn applying_the_same_projector_twice_changes_nothing() {
    let (d, text) = desk();
    let m = &d.suite.manifest;
    let out = unlearn(&context(d, text, UnlearnOptions::default()), &UnlearnMode::Global, &m.forget_classes).unwrap();
    let p = &out.projectors["photo"];
    let once = out.bank.effective("photo").unwrap();
    let twice = once.matmul(p.matrix()).unwrap();
    assert!(twice.max_abs_diff(once) <= 1e-10);
}

#[test]
fn whole_domain_erasure_drops_to_chance() {
    let (d, text) = desk();
    let mut m = d.suite.manifest.clone();
    m.forget_classes = m.classes.clone();
    let out = unlearn(&context(d, text, UnlearnOptions::default()), &UnlearnMode::CompleteSelectiveDomain(photo()), &m.classes)
        .unwrap();
    let report = evaluate(&d.suite.data, &out.bank, &m, text).unwrap();
    let chance = 100.0 / m.classes.len() as f64;
    for dom in &report.domains {
        if dom.domain == "photo" {
            assert!(dom.overall.af.unwrap() <= 1.5 * chance);
        } else {
            assert_eq!(dom.overall.bf_counts, dom.overall.af_counts);
        }
    }
}

#[test]
fn pooled_selective_uses_one_projector() {
    let (d, text) = desk();
    let m = &d.suite.manifest;
    let both: BTreeSet<String> = ["photo".to_string(), "sketch".to_string()].into();
    let options = UnlearnOptions { pooled: true, ..Default::default() };
    let out = unlearn(&context(d, text, options), &UnlearnMode::SelectiveDomain(both), &m.forget_classes).unwrap();
    assert_eq!(out.matrices.len(), 1);
    assert_eq!(out.projectors["photo"].matrix(), out.projectors["sketch"].matrix());
    assert_eq!(out.projectors["photo"].rank_removed(), 9);
}

fn table_from(rows: &[(&str, Vec<f64>)]) -> TextTable {
    let mut t = TextTable::default();
    for (name, v) in rows {
        t.classes.insert(name.to_string(), l2_normalize(v).unwrap());
    }
    t
}

#[test]
fn collinear_visual_rows_do_not_add_rank() {
    let e = 16;
    let classes: Vec<String> = vec!["a".into(), "b".into(), "c".into()];
    let domains: Vec<String> = vec!["photo".into()];
    let vecs: Vec<(&str, Vec<f64>)> = vec![("a", gaussian_vec(1, e)), ("b", gaussian_vec(2, e)), ("c", gaussian_vec(3, e))];
    let table = table_from(&vecs);
    let text = TextEmbedder::from_table(table.clone()).unwrap();
    let w = Matrix::identity(e);
    let ctx = ForgetContext {
        classes: &classes,
        domains: &domains,
        text: &text,
        visual: VisualSource::Precomputed(&table),
        projection: &w,
        options: UnlearnOptions::default(),
    };
    let forget = vec!["a".to_string(), "b".to_string()];
    let out = unlearn(&ctx, &UnlearnMode::Global, &forget).unwrap();
    assert_eq!(out.matrices[0].matrix.len(), 4);
    assert_eq!(out.projectors["photo"].rank_removed(), 2);
}

#[test]
fn generic_rows_have_full_rank() {
    let (d, text) = desk();
    let m = &d.suite.manifest;
    let out = unlearn(&context(d, text, UnlearnOptions::default()), &UnlearnMode::Global, &m.forget_classes).unwrap();
    assert_eq!(out.projectors["photo"].rank_removed(), 6);
}

fn bank_case() -> impl Strategy<Value = (u64, usize, usize, usize)> {
    // (seed, D, E, rows)
    (any::<u64>(), 4usize..24, 4usize..24).prop_flat_map(|(s, d, e)| (Just(s), Just(d), Just(e), 1..e))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bank_annihilates_any_input((seed, d, e, k) in bank_case(), probe in any::<u64>()) {
        let w = gaussian_matrix(seed, d, e);
        let rows = gaussian_matrix(seed.wrapping_add(1), k, e);
        let p = nullspace_projector(&rows, DEFAULT_RANK_TOL).unwrap();
        let domains = vec!["x".to_string(), "y".to_string()];
        let mode = UnlearnMode::SelectiveDomain(["x".to_string()].into());
        let projectors: BTreeMap<_, _> = [("x".to_string(), p)].into();
        let bank = apply_unlearning(&w, &mode, &domains, &projectors).unwrap();
        let f = gaussian_vec(probe, d);
        let base = w.vecmat(&f).unwrap();
        let h = bank.effective("x").unwrap().vecmat(&f).unwrap();
        for m in rows.row_iter() {
            prop_assert!(dot(&h, m).abs() <= 1e-8 * norm(&base).max(1e-300) * norm(m));
        }
        prop_assert_eq!(bank.effective("y").unwrap(), &w);
    }
}
