//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spyfall_core::experiments::{
    classify_corpus, exp1_prompt, load_annotations, load_corpus, replay_batch, run_baseline,
};
use spyfall_core::game_core::{
    Accusation, Ballot, GameConfig, GameState, HangResult, Location, OutcomeCause, Phase, PlayerId, RevealDecision,
};
use spyfall_core::gamelog::{load_dir, read_legacy, verify_replay};
use spyfall_core::response_parser::{detect_keyword_leak, QuestionParser, Tier};
use spyfall_core::scripts::{sha256_hex, ScriptSet};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn p(i: u8) -> PlayerId {
    PlayerId::new(i).unwrap()
}

fn fixture_replay() -> Outcome {
    let scripts = ScriptSet::bundled();
    let start = Instant::now();
    let logs = load_dir(&root().join("fixtures")).map_err(|e| e.to_string())?;
    ensure(logs.len() == 8, || format!("expected 8 fixtures, found {}", logs.len()))?;
    for log in &logs {
        let report = verify_replay(log, &scripts);
        ensure(report.ok(), || {
            format!("{} diverged: {:?}", log.gamecode, report.mismatches)
        })?;
        ensure(log.reconstruct_narration() == log.gamelog, || {
            format!("{} narration does not rebuild from its fields", log.gamecode)
        })?;
    }
    let legacy = read_legacy(&std::fs::read_to_string(root().join("fixtures/legacy/ena5005.txt")).unwrap())
        .map_err(|e| e.to_string())?;
    let json = logs.iter().find(|l| l.gamecode == "ena5005").unwrap();
    ensure(legacy.len() == 1 && &legacy[0] == json, || {
        "legacy ena5005 differs from JSON".into()
    })?;
    let ena5005 = verify_replay(json, &scripts);
    ensure(ena5005.ok() && json.spywin && json.total_turn == 3, || {
        "ena5005 fields".into()
    })?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("8/8 fixtures byte-exact in {} ms", elapsed.as_millis()))
}

fn exp2_aggregate() -> Outcome {
    let logs = load_dir(&root().join("fixtures")).map_err(|e| e.to_string())?;
    let (summary, _) = replay_batch(&logs, &ScriptSet::bundled());
    ensure(
        summary.spy_wins == 7 && summary.non_spy_wins == 1 && summary.aborted == 0,
        || format!("{summary:?}"),
    )?;
    let only_5005: Vec<_> = logs.into_iter().filter(|l| l.gamecode == "ena5005").collect();
    let (one, _) = replay_batch(&only_5005, &ScriptSet::bundled());
    ensure(one.mean_turns == 3.0, || {
        format!("ena5005 mean turns {}", one.mean_turns)
    })?;
    Ok(format!("spy:non-spy = {}:{}", summary.spy_wins, summary.non_spy_wins))
}

/// Target and text of a printed `(n, "...")` cell, read without the parser.
fn split_cell(cell: &str) -> (u8, String) {
    let inner = cell.trim().strip_prefix('(').unwrap().strip_suffix(')').unwrap();
    let (n, rest) = inner.split_once(',').unwrap();
    let text = rest.trim().strip_prefix('"').unwrap().strip_suffix('"').unwrap();
    (n.trim().parse().unwrap(), text.to_string())
}

fn parser_golden() -> Outcome {
    let start = Instant::now();
    let parser = QuestionParser::default();
    let dir = root().join("fixtures/exp1");
    let annotations = load_annotations(&dir.join("annotations.json")).map_err(|e| e.to_string())?;
    let gpt4 = load_corpus(&dir.join("gpt4_table1.json")).map_err(|e| e.to_string())?;
    ensure(gpt4.len() == 30, || format!("{} GPT-4 cells", gpt4.len()))?;
    let report = classify_corpus(&gpt4, &parser, &annotations);
    for r in &report.records {
        let cell = &gpt4.iter().find(|c| c.id == r.id).unwrap().text;
        let (target, text) = split_cell(cell);
        let got = r
            .outcome
            .action
            .as_ref()
            .ok_or_else(|| format!("{} not parsed", r.id))?;
        ensure(r.outcome.class.tier == Tier::SuccessfulWellFormed, || {
            format!("{} is {:?}", r.id, r.outcome.class.tier)
        })?;
        ensure(got.target.get() == target && got.text == text, || {
            format!("{} parsed as {got:?}", r.id)
        })?;
    }
    let quotes = load_corpus(&dir.join("error_quotes.json")).map_err(|e| e.to_string())?;
    let report = classify_corpus(&quotes, &parser, &annotations);
    let wrong = report.label_mismatches();
    ensure(wrong.is_empty(), || format!("mismatched tiers: {wrong:?}"))?;
    let trio: Vec<Tier> = report
        .records
        .iter()
        .filter(|r| r.id.starts_with("figure1-"))
        .map(|r| r.outcome.class.tier)
        .collect();
    ensure(
        trio == [
            Tier::UsableMultipleAnswers,
            Tier::UsableSuperfluous,
            Tier::UsableMultipleAnswers,
        ],
        || format!("figure trio {trio:?}"),
    )?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "30 GPT-4 cells well-formed, {} quoted errors on label",
        quotes.len()
    ))
}

fn keyword_leaks() -> Outcome {
    let leaks = [
        ("What is your favorite thing to do at the beach?", "beach"),
        ("what's your favorite animal in the zoo?", "zoo"),
        (
            "What's your favorite thing to eat at a corporate party?",
            "corporate party",
        ),
    ];
    for (q, loc) in leaks {
        ensure(detect_keyword_leak(q, Location::parse(loc).unwrap()), || {
            format!("missed leak in {q:?}")
        })?;
    }
    let gpt4 = load_corpus(&root().join("fixtures/exp1/gpt4_table1.json")).map_err(|e| e.to_string())?;
    for r in &gpt4 {
        let (_, text) = split_cell(&r.text);
        ensure(!detect_keyword_leak(&text, r.location.unwrap()), || {
            format!("false leak in {}", r.id)
        })?;
    }
    Ok("3 leaks flagged, 0 of 30 GPT-4 questions flagged".into())
}

/// Exact one-round spy-identification probability for `n` players, by
/// enumerating every vote vector; undecided rounds are redrawn.
fn enumeration_oracle(n: usize) -> f64 {
    let mut decided = 0u32;
    let mut spy = 0u32;
    let mut votes = vec![0usize; n];
    loop {
        let valid = votes.iter().enumerate().all(|(voter, &v)| v != voter);
        if valid {
            let mut counts = vec![0usize; n];
            for &v in &votes {
                counts[v] += 1;
            }
            if let Some(winner) = counts.iter().position(|&c| 2 * c > n) {
                decided += 1;
                spy += u32::from(winner == 0);
            }
        }
        let mut i = 0;
        while i < n {
            votes[i] += 1;
            if votes[i] < n {
                break;
            }
            votes[i] = 0;
            i += 1;
        }
        if i == n {
            break;
        }
    }
    f64::from(spy) / f64::from(decided)
}

fn baseline() -> Outcome {
    let start = Instant::now();
    let five = run_baseline(100_000, 2023, 5);
    ensure((five - 0.2).abs() <= 0.01, || format!("5-player estimate {five}"))?;
    let oracle4 = enumeration_oracle(4);
    ensure((oracle4 - 0.25).abs() < 1e-12, || format!("4-player oracle {oracle4}"))?;
    let four = run_baseline(100_000, 2023, 4);
    let sigma = (0.25f64 * 0.75 / 100_000.0).sqrt();
    ensure((four - oracle4).abs() < 3.0 * sigma, || {
        format!("4-player estimate {four} vs {oracle4}")
    })?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!("5p {five:.4}, 4p {four:.4} (oracle {oracle4})"))
}

fn carnival(spy: u8) -> GameState {
    GameState::new_game(GameConfig::new(Location::parse("carnival").unwrap(), p(spy))).unwrap()
}

fn hang_boundary() -> Result<(), String> {
    for spy in 1..=5u8 {
        for accused in 2..=5u8 {
            for mask in 0u8..16 {
                let mut s = carnival(spy);
                s.apply_question(p(1), p(2), "q").unwrap();
                s.apply_answer("a").unwrap();
                let poll: BTreeMap<_, _> = (1..=5)
                    .map(|i| {
                        (
                            p(i),
                            if i == 1 {
                                Accusation::Named(p(accused))
                            } else {
                                Accusation::NoAccusation
                            },
                        )
                    })
                    .collect();
                s.record_accusation_poll(&poll).unwrap();
                let voters = s.hang_voters();
                ensure(voters.len() == 4 && !voters.contains(&p(accused)), || {
                    "electorate".into()
                })?;
                let ballots: BTreeMap<_, _> = voters
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        (
                            v,
                            if mask >> i & 1 == 1 {
                                Ballot::Hang
                            } else {
                                Ballot::NoHang
                            },
                        )
                    })
                    .collect();
                let result = s.tally_hang_vote(&ballots).unwrap();
                let expected = if mask.count_ones() >= 4 {
                    HangResult::Hanged
                } else {
                    HangResult::NotHanged
                };
                ensure(result == expected, || format!("mask {mask:04b}: {result:?}"))?;
                if result == HangResult::Hanged {
                    let cause = s.outcome().unwrap().cause;
                    let want = if accused == spy {
                        OutcomeCause::HangedSpy
                    } else {
                        OutcomeCause::HangedNonSpy
                    };
                    ensure(cause == want, || format!("cause {cause:?}"))?;
                } else {
                    ensure(s.phase == Phase::RevealWindow, || {
                        "failed vote must open the reveal window".into()
                    })?;
                }
            }
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Op {
    Question,
    Answer,
    Poll,
    Hang,
    Reveal,
    FinalVote,
}

impl Op {
    fn phase(self) -> Phase {
        match self {
            Op::Question => Phase::AwaitQuestion,
            Op::Answer => Phase::AwaitAnswer,
            Op::Poll => Phase::AccusationPoll,
            Op::Hang => Phase::HangVoting,
            Op::Reveal => Phase::RevealWindow,
            Op::FinalVote => Phase::FinalVote,
        }
    }
}

const OPS: [Op; 6] = [Op::Question, Op::Answer, Op::Poll, Op::Hang, Op::Reveal, Op::FinalVote];

fn apply_random(s: &mut GameState, op: Op, rng: &mut ChaCha8Rng) -> Result<(), String> {
    let seat = |rng: &mut ChaCha8Rng| p(rng.random_range(1..=5));
    let r = match op {
        Op::Question => {
            let asker = if rng.random_bool(0.9) { s.next_asker } else { seat(rng) };
            s.apply_question(asker, seat(rng), "q").map(drop)
        }
        Op::Answer => s.apply_answer("a"),
        Op::Poll => {
            let poll = (1..=5)
                .map(|i| {
                    let a = if rng.random_bool(0.15) {
                        Accusation::Named(seat(rng))
                    } else {
                        Accusation::NoAccusation
                    };
                    (p(i), a)
                })
                .collect();
            s.record_accusation_poll(&poll)
        }
        Op::Hang => {
            let accused = s.current_record().and_then(|r| r.accusation).map(|a| a.1);
            let mut ballots = BTreeMap::new();
            for i in 1..=5 {
                let b = if rng.random_bool(0.5) {
                    Ballot::Hang
                } else {
                    Ballot::NoHang
                };
                if Some(p(i)) != accused && rng.random_bool(0.97) {
                    ballots.insert(p(i), b);
                }
            }
            s.tally_hang_vote(&ballots).map(drop)
        }
        Op::Reveal => {
            let d = if rng.random_bool(0.9) {
                RevealDecision::Pass
            } else {
                RevealDecision::Guess(Location::from_index(rng.random_range(0..30)).unwrap())
            };
            s.apply_reveal(d)
        }
        Op::FinalVote => {
            let ballots = (1..=5).map(|i| (p(i), seat(rng))).collect();
            s.tally_final_vote(&ballots).map(drop)
        }
    };
    r.map_err(|e| e.to_string())
}

fn random_games() -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut guard_rejections = 0;
    for game in 0..1000 {
        let mut s = carnival(rng.random_range(1..=5));
        let mut accusers = BTreeSet::new();
        for _ in 0..2000 {
            if s.is_finished() {
                break;
            }
            let op = if rng.random_bool(0.8) {
                OPS.into_iter().find(|o| o.phase() == s.phase).unwrap()
            } else {
                OPS[rng.random_range(0..6)]
            };
            let before = s.clone();
            let result = apply_random(&mut s, op, &mut rng);
            if op.phase() != before.phase {
                ensure(result.is_err(), || {
                    format!("game {game}: {op:?} accepted in {:?}", before.phase)
                })?;
                guard_rejections += 1;
            }
            if result.is_err() {
                let unchanged = s == before;
                ensure(unchanged, || format!("game {game}: failed {op:?} changed state"))?;
                continue;
            }
            if op == Op::Poll {
                if let Some((accuser, _)) = s.current_record().and_then(|r| r.accusation) {
                    ensure(accusers.insert(accuser), || {
                        format!("game {game}: player {accuser} accused twice")
                    })?;
                }
            }
            let spent = s.accusation_rights.values().filter(|r| !**r).count();
            ensure(spent == accusers.len(), || format!("game {game}: rights out of sync"))?;
        }
    }
    Ok(guard_rejections)
}

fn state_machine() -> Outcome {
    let start = Instant::now();
    hang_boundary()?;
    let guards = random_games()?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "16 ballot vectors x 20 setups, 1000 random games, {guards} guard violations rejected"
    ))
}

const PINNED: [(&str, &str); 11] = [
    (
        "parser/boilerplate.txt",
        "3e281d7189f356915037e9410ba087b46a7b124065b8f7cd60fbc1d38f5e1a7f",
    ),
    (
        "preamble/non_spy.txt",
        "52c92e02c66974357083a815c83860cbc8780024075f6aa849bb58a7dcb90c57",
    ),
    (
        "preamble/spy.txt",
        "92fe3ffc62621299e8f09c02b535765f52748bd2ee19804efe24b5ac90fe2b44",
    ),
    (
        "requests/accusation_poll.txt",
        "b3cdbcd585a3cb0f6a1a5cf45b82562b3f074c0348c1a5a1d9e9098ec2d6e504",
    ),
    (
        "requests/answer_question.txt",
        "d6d07e7da0b6703e3d9f59a60006bd30b9d73a6e44bdfbafe784f507bf5d1404",
    ),
    (
        "requests/ask_question.txt",
        "326d451af9c18188765d2dfa12631eb41c710096d3c6187e20032ead836f7e40",
    ),
    (
        "requests/final_vote.txt",
        "88ca43390cb2475832ddfca1f006edb2e5aa1ca8da036817ba1e787129762830",
    ),
    (
        "requests/hang_vote.txt",
        "3b4a6844319cf65806b77721cd1c5897be234fb37e0626a760dc5246bba5a69a",
    ),
    (
        "requests/reveal_window.txt",
        "a6455f575bd245e1b0d7dd16f2017bf18452b8b7dc56ee33efc8942d80828d3d",
    ),
    (
        "rule.txt",
        "25f99289fe62ca2051fd8fa6dc6ed5cf0ca86ccfb4333dd8376564f33ee7dfe7",
    ),
    (
        "strategy.txt",
        "ba6b1833671aa332a1fab505d19c3d655a06ec4649469321612e844257f0645d",
    ),
];

fn prompt_exactness() -> Outcome {
    let dir = root().join("scripts");
    let read = |name: &str| std::fs::read_to_string(dir.join(name)).unwrap();
    for (name, sum) in PINNED {
        let got = sha256_hex(read(name).as_bytes());
        ensure(got == sum, || format!("{name} checksum {got}"))?;
    }
    let scripts = ScriptSet::bundled();
    for (name, sum) in &scripts.checksums {
        ensure(PINNED.contains(&(name.as_str(), sum.as_str())), || {
            format!("bundled {name} not pinned")
        })?;
    }
    let expected = [
        read("rule.txt").trim_end().to_string(),
        read("strategy.txt").trim_end().to_string(),
        "You are player 1. You're not a spy; the location is 'airplane'.".to_string(),
        read("requests/ask_question.txt").trim_end().to_string(),
    ]
    .join("\n\n");
    let got = exp1_prompt(&scripts, Location::parse("airplane").unwrap());
    ensure(got == expected, || {
        let at = got.bytes().zip(expected.bytes()).take_while(|(a, b)| a == b).count();
        format!("prompt differs at byte {at}")
    })?;
    Ok(format!("{} bytes, {} checksums pinned", got.len(), PINNED.len()))
}

fn table2_report() -> Outcome {
    let dir = root().join("fixtures/exp1");
    let annotations = load_annotations(&dir.join("annotations.json")).map_err(|e| e.to_string())?;
    let parser = QuestionParser::default();
    let mut summary = Vec::new();
    for file in ["gpt35_table1.json", "error_quotes.json"] {
        let corpus = load_corpus(&dir.join(file)).map_err(|e| e.to_string())?;
        let mut hand: BTreeMap<Tier, usize> = Tier::ALL.iter().map(|&t| (t, 0)).collect();
        for r in &corpus {
            *hand
                .get_mut(&r.label.ok_or_else(|| format!("{} unlabeled", r.id))?)
                .unwrap() += 1;
        }
        let report = classify_corpus(&corpus, &parser, &annotations);
        ensure(report.tiers == hand, || {
            format!("{file}: {:?} vs hand {hand:?}", report.tiers)
        })?;
        let sum: usize = report.tiers.values().sum();
        ensure(sum == report.total_responses, || format!("{file}: tiers sum {sum}"))?;
        summary.push(format!("{file} {}", report.total_responses));
    }
    let released = dir.join("released_responses.json");
    if released.exists() {
        let corpus = load_corpus(&released).map_err(|e| e.to_string())?;
        let report = classify_corpus(&corpus, &parser, &annotations);
        ensure(report.total_responses == 68, || {
            format!("released corpus has {}", report.total_responses)
        })?;
        let sum: usize = report.tiers.values().sum();
        ensure(sum == 68, || format!("released tiers sum {sum}"))?;
        summary.push("released 68".into());
    } else {
        summary.push("released 68-response corpus not present, skipped".into());
    }
    Ok(summary.join(", "))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("fixture replay", fixture_replay),
        ("exp2 aggregate 7:1", exp2_aggregate),
        ("parser golden suite", parser_golden),
        ("keyword-leak detection", keyword_leaks),
        ("1/n baseline", baseline),
        ("state-machine properties", state_machine),
        ("prompt bit-exactness", prompt_exactness),
        ("table-2 report", table2_report),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({why})", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
