use wellstate_core::annotate::{
    annotate_corpus, build_prompt, cache_key, render_exemplars, render_items, Annotator, Dimension, LlmBackend,
    MockBackend, ReplayBackend, ResponseCache, SpecSet, PROMPT_TEMPLATE,
};
use wellstate_core::{Corpus, Post, Timeline};

// Placeholder occurrences in the template, counted independently of the
// renderer: every slot is replaced, nothing else changes.
#[test]
fn prompt_length_accounting() {
    let specs = SpecSet::builtin();
    let target = "We argued about the {rent} again and I left early.";
    for d in Dimension::ALL {
        let spec = specs.get(d);
        let prompt = build_prompt(spec, target).unwrap();
        let items = render_items(spec);
        let examples = render_exemplars(spec);
        let slots = [
            ("{Dimension}", d.title().len()),
            ("{dimension}", d.key().len()),
            ("{items}", items.len()),
            ("{examples}", examples.len()),
            ("{text}", target.len()),
        ];
        let mut expected = PROMPT_TEMPLATE.len() as isize;
        for (name, len) in slots {
            let count = PROMPT_TEMPLATE.matches(name).count() as isize;
            assert!(count > 0, "{name} missing from template");
            expected += count * (len as isize - name.len() as isize);
        }
        assert_eq!(prompt.len() as isize, expected, "{d}");
        assert!(prompt.ends_with(target));
        for item in &spec.items {
            assert!(prompt.contains(item.as_str()));
        }
        for e in &spec.exemplars {
            assert!(prompt.contains(e.text.as_str()));
        }
        assert!(!prompt.contains("{Dimension}") && !prompt.contains("{items}"));
        // the user's braces survive untouched
        assert!(prompt.contains("{rent}"));
    }
}

fn corpus(n: usize) -> Corpus {
    let posts = (0..n)
        .map(|i| Post::from_text(format!("p{i:03}"), i as i64, format!("Day {i}. I talked with my sister and felt calmer.")))
        .collect();
    Corpus { timelines: vec![Timeline { user_id: "u".into(), posts }] }
}

#[test]
fn cache_file_survives_reopen_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cache.jsonl");
    let specs = SpecSet::builtin();
    let c = corpus(5);

    let mock = MockBackend::new();
    let first = {
        let cache = ResponseCache::open(&path).unwrap();
        annotate_corpus(&Annotator::new(&mock).with_cache(&cache), &specs, &c)
    };
    assert_eq!(mock.calls(), 5 * 8);
    assert!(first.failures.is_empty());

    let again = MockBackend::new();
    let cache = ResponseCache::open(&path).unwrap();
    assert_eq!(cache.len(), 5 * 8);
    let second = annotate_corpus(&Annotator::new(&again).with_cache(&cache), &specs, &c);
    assert_eq!(again.calls(), 0);
    assert_eq!(first, second);

    let replay = ReplayBackend::from_file(mock.identity(), &path).unwrap();
    let replayed = annotate_corpus(&Annotator::new(&replay), &specs, &c);
    assert_eq!(first, replayed);
}

#[test]
fn cache_keys_separate_identities() {
    assert_ne!(cache_key("a", "bc"), cache_key("ab", "c"));
    assert_eq!(cache_key("m", "p").len(), 64);
}
