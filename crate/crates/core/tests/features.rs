use std::sync::Arc;

use modwatch_core::corpus::{Corpus, RecordKind, Tokenizer};
use modwatch_core::features::{
    read_feature_csv, write_feature_csv, ConstantScorer, FeatureContext, FeatureError, FeatureRow,
    FeatureSchema, Label, Lexicon, LexiconScorer, RowFlag, Span,
};
use modwatch_core::synth::{random_fixture, shifted_after};
use modwatch_core::{MonthWindow, YearMonth};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

fn ym(s: &str) -> YearMonth {
    s.parse().unwrap()
}

fn ts(m: &str, day: i64) -> i64 {
    ym(m).start_epoch_seconds() + day * 86_400
}

fn corpus(lines: &[(RecordKind, serde_json::Value)]) -> Corpus {
    let mut c = Corpus::new(MonthWindow::new(ym("2019-01"), ym("2019-12")).unwrap());
    for (kind, v) in lines {
        let report = c.ingest_str(&v.to_string(), *kind).unwrap();
        assert_eq!(report.accepted, 1, "{v}");
    }
    c
}

fn comment(
    id: &str,
    author: &str,
    sub: &str,
    month: &str,
    body: &str,
) -> (RecordKind, serde_json::Value) {
    (
        RecordKind::Comment,
        json!({"id": id, "author": author, "subreddit": sub, "created": ts(month, 3), "body": body}),
    )
}

fn ban(sub: &str, month: &str) -> (RecordKind, serde_json::Value) {
    (
        RecordKind::Intervention,
        json!({"subreddit": sub, "action": "ban", "date": month}),
    )
}

fn context(c: &Corpus) -> FeatureContext<'_> {
    let tk = Tokenizer::default();
    FeatureContext::builder(c)
        .lexicon(Lexicon::demo(&tk))
        .scorer(Arc::new(LexiconScorer::default_toxic()))
        .tokenizer(tk)
        .build()
        .unwrap()
}

/// Members u1 and u2 of `target` were active in `bad` (banned 2019-03); u3
/// was active in `later`, banned one month after the cutoff.
fn planted_memberships(extra: &[(RecordKind, serde_json::Value)]) -> Corpus {
    let mut lines = vec![
        comment("b1", "u1", "bad", "2019-01", "idiot talk"),
        comment("b2", "u2", "bad", "2019-02", "moron talk"),
        comment("l1", "u3", "later", "2019-02", "fool talk"),
        comment("l2", "u9", "later", "2019-02", "other words"),
        ban("bad", "2019-03"),
        ban("later", "2019-05"),
    ];
    for (i, u) in ["u1", "u2", "u3", "u4", "u5"].iter().enumerate() {
        lines.push(comment(
            &format!("t{i}"),
            u,
            "target",
            "2019-03",
            "happy words here",
        ));
        lines.push(comment(
            &format!("s{i}"),
            u,
            "target",
            "2019-04",
            "more happy words",
        ));
    }
    lines.extend_from_slice(extra);
    corpus(&lines)
}

#[test]
fn users_connected_to_banned_counts_planted_members() {
    let c = planted_memberships(&[]);
    let ctx = context(&c);
    let row = ctx
        .extract("target", Span::new(ym("2019-03"), ym("2019-04")), None)
        .unwrap();
    assert_eq!(row.values["users_connected_to_banned"], 2.0);
    // u1, u2 in bad (2019-01/02) and u3 in later (2019-02) are outside the span
    assert_eq!(row.values["connected_communities"], 0.0);
    assert_eq!(row.label, Label::Clean);
}

#[test]
fn ban_one_month_after_cutoff_contributes_nothing() {
    let with_later = planted_memberships(&[]);
    let row_a = context(&with_later)
        .extract("target", Span::new(ym("2019-03"), ym("2019-04")), None)
        .unwrap();
    // same corpus with the later ban moved further out
    let mut lines = vec![
        comment("b1", "u1", "bad", "2019-01", "idiot talk"),
        comment("b2", "u2", "bad", "2019-02", "moron talk"),
        comment("l1", "u3", "later", "2019-02", "fool talk"),
        comment("l2", "u9", "later", "2019-02", "other words"),
        ban("bad", "2019-03"),
    ];
    for (i, u) in ["u1", "u2", "u3", "u4", "u5"].iter().enumerate() {
        lines.push(comment(
            &format!("t{i}"),
            u,
            "target",
            "2019-03",
            "happy words here",
        ));
        lines.push(comment(
            &format!("s{i}"),
            u,
            "target",
            "2019-04",
            "more happy words",
        ));
    }
    let without = corpus(&lines);
    let row_b = context(&without)
        .extract("target", Span::new(ym("2019-03"), ym("2019-04")), None)
        .unwrap();
    assert_eq!(
        row_a.values["users_connected_to_banned"],
        row_b.values["users_connected_to_banned"]
    );
    assert_eq!(
        row_a.values["banned_vocab_similarity"],
        row_b.values["banned_vocab_similarity"]
    );

    // advancing the cutoff past the later ban picks up u3
    let row_c = context(&with_later)
        .extract("target", Span::new(ym("2019-03"), ym("2019-05")), None)
        .unwrap();
    assert_eq!(row_c.values["users_connected_to_banned"], 3.0);
}

#[test]
fn no_mentions_means_zero_mention_features() {
    let c = planted_memberships(&[]);
    let row = context(&c)
        .extract("target", Span::new(ym("2019-03"), ym("2019-04")), None)
        .unwrap();
    for k in [
        "community_mentions",
        "negative_community_mentions",
        "news_mentions",
        "negative_news_mentions",
    ] {
        assert_eq!(row.values[k], 0.0, "{k}");
    }
}

#[test]
fn mentions_are_cumulative_up_to_cutoff() {
    let m = |date: &str, source: &str, sentiment: &str| {
        (
            RecordKind::Mention,
            json!({"target_subreddit": "target", "source": source, "date": date, "sentiment": sentiment}),
        )
    };
    let c = planted_memberships(&[
        m("2019-01", "community", "negative"),
        m("2019-04", "community", "other"),
        m("2019-04", "news", "negative"),
        m("2019-05", "news", "negative"),
    ]);
    let row = context(&c)
        .extract("target", Span::new(ym("2019-03"), ym("2019-04")), None)
        .unwrap();
    assert_eq!(row.values["community_mentions"], 2.0);
    assert_eq!(row.values["negative_community_mentions"], 1.0);
    assert_eq!(row.values["news_mentions"], 1.0);
    assert_eq!(row.values["negative_news_mentions"], 1.0);
}

#[test]
fn language_and_toxicity_features() {
    let c = corpus(&[
        comment("a", "x", "s", "2019-02", "you idiot"),
        comment("b", "y", "s", "2019-02", "happy happy sad"),
        comment("c", "z", "s", "2019-02", "the weather"),
    ]);
    let row = context(&c)
        .extract("s", Span::single(ym("2019-02")), None)
        .unwrap();
    assert!((row.values["toxic_rate"] - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(row.values["toxic_comments"], 1.0);
    // tokens: idiot | happi happi sad | weather -> 5 tokens, 2 posemo, 1 negemo
    assert!((row.values["lex_posemo"] - 2.0 / 5.0).abs() < 1e-15);
    assert!((row.values["lex_negemo"] - 1.0 / 5.0).abs() < 1e-15);
    assert!(row.flags.contains(&RowFlag::SingleMonthSpan));
    assert!(row.flags.contains(&RowFlag::ModeratorsUnavailable));
}

#[test]
fn community_and_moderator_features() {
    let c = corpus(&[
        (
            RecordKind::Post,
            json!({"id": "p1", "author": "x", "subreddit": "s", "created": ts("2019-02", 1), "title": "t", "score": 5, "removed": true}),
        ),
        (
            RecordKind::Post,
            json!({"id": "p2", "author": "y", "subreddit": "s", "created": ts("2019-03", 1), "title": "t", "score": 2}),
        ),
        (
            RecordKind::Comment,
            json!({"id": "c1", "author": "x", "subreddit": "s", "created": ts("2019-02", 2), "body": "a", "score": 4, "parent_id": "t3_p1", "controversial": true}),
        ),
        (
            RecordKind::Comment,
            json!({"id": "c2", "author": "m", "subreddit": "s", "created": ts("2019-02", 2), "body": "b", "score": 10, "parent_id": "t3_p1", "controversial": true, "gilded": true}),
        ),
        (
            RecordKind::Comment,
            json!({"id": "c3", "author": "AutoModerator", "subreddit": "s", "created": ts("2019-03", 2), "body": "c", "score": 1, "parent_id": "t3_p2"}),
        ),
        (
            RecordKind::Comment,
            json!({"id": "c4", "author": "[deleted]", "subreddit": "s", "created": ts("2019-03", 2), "body": "d", "score": -2, "removed": true}),
        ),
        (
            RecordKind::Moderator,
            json!({"subreddit": "s", "user": "m", "start_month": "2019-01", "end_month": "2019-02"}),
        ),
        (
            RecordKind::Moderator,
            json!({"subreddit": "s", "user": "n", "start_month": "2019-03"}),
        ),
    ]);
    let row = context(&c)
        .extract("s", Span::new(ym("2019-02"), ym("2019-03")), Some(1))
        .unwrap();
    let v = &row.values;
    assert_eq!(v["posts"], 2.0);
    assert_eq!(v["comments"], 4.0);
    assert_eq!(v["active_commenters"], 3.0); // x, m, AutoModerator
    assert_eq!(v["controversial_comments"], 2.0);
    assert_eq!(v["gilded_comments"], 1.0);
    // per-post controversial counts {2, 0}
    assert_eq!(v["controversial_per_post_mean"], 1.0);
    assert_eq!(v["controversial_per_post_p90"], 1.8);
    assert_eq!(v["moderators"], 1.0);
    assert_eq!(v["incoming_moderators"], 1.0);
    assert_eq!(v["outgoing_moderators"], 1.0);
    assert_eq!(v["moderator_comment_score_mean"], 10.0);
    assert_eq!(v["automoderator_comments"], 1.0);
    assert_eq!(v["removed_posts"], 1.0);
    assert_eq!(v["removed_posts_score"], 5.0);
    assert_eq!(v["removed_comments_rate"], 0.25);
    assert_eq!(v["deleted_account_comments"], 1.0);
    // comment score moments over {4, 10, 1, -2}
    assert_eq!(v["comment_score_mean"], 3.25);
    assert_eq!(v["comment_score_median"], 2.5);
    // active users: 2019-02 {x, m}, 2019-03 {y, AutoModerator}
    assert_eq!(v["active_user_growth"], 0.0);
    assert!(!row.flags.contains(&RowFlag::ModeratorsUnavailable));
}

#[test]
fn empty_span_is_flagged_zero_row_with_full_schema() {
    let c = planted_memberships(&[]);
    let ctx = context(&c);
    let empty = ctx
        .extract("target", Span::single(ym("2019-09")), None)
        .unwrap();
    let full = ctx
        .extract("target", Span::new(ym("2019-03"), ym("2019-04")), None)
        .unwrap();
    assert!(empty.flags.contains(&RowFlag::EmptyActivity));
    assert!(empty.values.values().all(|v| *v == 0.0));
    assert!(empty.values.keys().eq(full.values.keys()));
}

#[test]
fn missing_lexicon_or_scorer_is_an_error() {
    let c = planted_memberships(&[]);
    assert!(matches!(
        FeatureContext::builder(&c)
            .scorer(Arc::new(ConstantScorer(0.0)))
            .build(),
        Err(FeatureError::MissingLexicon)
    ));
    assert!(matches!(
        FeatureContext::builder(&c)
            .lexicon(Lexicon::demo(&Tokenizer::default()))
            .build(),
        Err(FeatureError::MissingScorer)
    ));
}

#[test]
fn quarters_follow_lifespan_and_csv_round_trips() {
    let (window, records) = random_fixture(11);
    let c = records.to_corpus(window).unwrap();
    let ctx = context(&c);
    let (rows, _excluded) = ctx.extract_all();
    assert!(!rows.is_empty());
    let schema = FeatureSchema::of_rows(&rows).unwrap();
    assert!(schema.len() > 40);
    for r in &rows {
        assert!(r.values.values().all(|v| v.is_finite()));
    }
    for sub in rows
        .iter()
        .map(|r| r.subreddit.clone())
        .collect::<std::collections::BTreeSet<_>>()
    {
        let qs: Vec<&FeatureRow> = rows.iter().filter(|r| r.subreddit == sub).collect();
        assert_eq!(qs.len(), 4);
        assert!(qs.windows(2).all(|w| w[0].cutoff() < w[1].cutoff()));
    }
    let mut buf = Vec::new();
    write_feature_csv(&rows, &mut buf).unwrap();
    let back = read_feature_csv(buf.as_slice()).unwrap();
    assert_eq!(back, rows);
}

fn payload(row: &FeatureRow) -> String {
    // the label is the prediction target and is defined by the full history
    serde_json::to_string(&(
        &row.subreddit,
        &row.span,
        &row.quarter,
        &row.values,
        &row.flags,
    ))
    .unwrap()
}

#[test]
fn appending_future_records_never_changes_a_row() {
    for seed in 0..40 {
        let (window, base) = random_fixture(seed);
        let (_, donor) = random_fixture(seed + 1000);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cutoff = window.start.offset(rng.gen_range(0..11));
        let start = cutoff.offset(-rng.gen_range(0..3)).max(window.start);
        let span = Span::new(start, cutoff);

        let before = base.to_corpus(window).unwrap();
        let mut after = before.clone();
        shifted_after(&donor, cutoff, window, "x")
            .ingest_into(&mut after)
            .unwrap();
        shifted_after(&base, cutoff, window, "y")
            .ingest_into(&mut after)
            .unwrap();

        let (ca, cb) = (context(&before), context(&after));
        for sub in before.build_states().subreddits() {
            let a = ca.extract(sub, span, None).unwrap();
            let b = cb.extract(sub, span, None).unwrap();
            assert_eq!(payload(&a), payload(&b), "seed {seed} {sub} {span}");
        }
    }
}

#[test]
fn structural_counts_do_not_decrease_as_cutoff_advances() {
    for seed in 0..20 {
        let (window, records) = random_fixture(seed);
        let c = records.to_corpus(window).unwrap();
        let ctx = context(&c);
        for sub in c.build_states().subreddits() {
            let start = window.start;
            let mut prev = 0.0;
            for k in 0..12 {
                let row = ctx
                    .extract(sub, Span::new(start, start.offset(k)), None)
                    .unwrap();
                let v = row.values["users_connected_to_banned"];
                if !row.flags.contains(&RowFlag::EmptyActivity) {
                    assert!(v >= prev, "seed {seed} {sub}");
                    prev = v;
                }
            }
        }
    }
}
