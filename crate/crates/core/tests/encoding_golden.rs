mod common;

use skillrepair::logic::{parse_formula, Formula, Vocabulary};
use skillrepair::skill::{encode_skill_env, encode_skills_sys};
use skillrepair::trajectory::suggestion_to_constraint;

use common::{corner_task, staircase};

fn canonical(text: &str, v: &Vocabulary) -> Vec<String> {
    let mut out: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| parse_formula(l, v).unwrap().to_text(v))
        .collect();
    out.sort();
    out
}

fn rendered(fs: &[Formula], v: &Vocabulary) -> Vec<String> {
    let mut out: Vec<String> = fs.iter().map(|f| f.to_text(v)).collect();
    out.sort();
    out
}

#[test]
fn l2r_postconditions() {
    let fx = corner_task();
    let got = rendered(&encode_skill_env(&fx.vocab, &fx.skills[0]), &fx.vocab);
    assert_eq!(got, canonical(include_str!("fixtures/l2r_env.ltl"), &fx.vocab));
}

#[test]
fn l2r_preconditions() {
    let fx = corner_task();
    let got = rendered(&encode_skills_sys(&fx.vocab, &fx.skills[..1]).all(), &fx.vocab);
    assert_eq!(got, canonical(include_str!("fixtures/l2r_sys.ltl"), &fx.vocab));
}

#[test]
fn suggestion_constraint() {
    let fx = corner_task();
    let got = rendered(&suggestion_to_constraint(&staircase()).to_formulas(&fx.vocab), &fx.vocab);
    assert_eq!(got, canonical(include_str!("fixtures/l2r_suggestion.ltl"), &fx.vocab));
}

#[test]
fn rendering_round_trips() {
    let fx = corner_task();
    let v = &fx.vocab;
    let mut all = encode_skill_env(v, &fx.skills[1]);
    all.extend(encode_skills_sys(v, &fx.skills).all());
    for f in all {
        assert_eq!(parse_formula(&f.to_text(v), v).unwrap(), f);
    }
}
