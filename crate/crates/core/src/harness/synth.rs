//! A seeded toy film world and question/program corpus for end-to-end runs.

use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dataset::{Example, LinkedEntity};
use crate::kb::{Datetime, KbBuilder, KnowledgeBase, Literal, Object};
use crate::scorer::{tokenize, EmbeddingTable};
use crate::sexpr::{execute_program, parse, Denotation};

pub const TRAIN_SIZE: usize = 200;
pub const HELDOUT_SIZE: usize = 40;
pub const EMBEDDING_DIM: usize = 32;

const COUNTRIES: [&str; 6] = ["Avaland", "Borvia", "Cestria", "Dornia", "Elbany", "Fenmark"];
const CITIES: [&str; 12] = [
    "Ashford", "Brindle", "Coldwater", "Dunmore", "Eastvale", "Farrow", "Glenrock", "Highmoor", "Ironbridge", "Juniper",
    "Kestrel_Bay", "Larkspur",
];
const GENRES: [&str; 5] = ["Drama", "Comedy", "Thriller", "Western", "Documentary"];
const AWARDS: [&str; 4] = ["Golden_Lantern", "Silver_Reel", "Crystal_Mask", "Iron_Quill"];
const FEMALE: [&str; 9] = ["Ada", "Clara", "Elena", "Greta", "Iris", "Katya", "Mira", "Olga", "Rosa"];
const MALE: [&str; 9] = ["Bruno", "Dmitri", "Felix", "Hugo", "Jonas", "Leon", "Nils", "Pavel", "Stefan"];
const SURNAMES: [&str; 12] = ["Marsh", "Vale", "Crane", "Holt", "Price", "Wren", "Stone", "Frost", "Lind", "Moss", "Quill", "Rook"];
const ADJECTIVES: [&str; 8] = ["Silent", "Broken", "Golden", "Hidden", "Last", "Crimson", "Frozen", "Distant"];
const NOUNS: [&str; 8] = ["River", "Harbor", "Winter", "Garden", "Signal", "Kingdom", "Orchard", "Lantern"];
const MONTH_NAMES: [&str; 12] = [
    "January", "February", "March", "April", "May", "June", "July", "August", "September", "October", "November",
    "December",
];

const PEOPLE: usize = 36;
const DIRECTORS: usize = 10;
const FILMS: usize = 32;

/// Generated KB, corpus and word vectors.
#[derive(Debug, Clone)]
pub struct Synthetic {
    pub kb: KnowledgeBase,
    pub train: Vec<Example>,
    /// Questions whose programs combine functions and relations in ways the
    /// training split never does.
    pub heldout: Vec<Example>,
    pub embeddings: EmbeddingTable,
}

struct World {
    kb: KnowledgeBase,
    people: Vec<String>,
    directors: Vec<String>,
    films: Vec<String>,
}

fn mention(name: &str) -> String {
    name.replace('_', " ")
}

fn add(b: &mut KbBuilder, s: &str, p: &str, o: Object) {
    b.add(s, p, o).expect("generated records are well-formed");
}

fn ent(name: &str) -> Object {
    Object::Entity(name.to_string())
}

fn build_world(rng: &mut ChaCha8Rng) -> World {
    let mut b = KbBuilder::new();
    for c in COUNTRIES {
        b.add_class(c, "location.country").expect("valid");
    }
    for c in CITIES {
        b.add_class(c, "location.city").expect("valid");
        add(&mut b, c, "location.city.country", ent(COUNTRIES.choose(rng).expect("non-empty")));
        let population = rng.gen_range(40..=400) as f64 * 10_000.0;
        add(&mut b, c, "location.city.population", Object::Literal(Literal::Numeric(population)));
    }
    for g in GENRES {
        b.add_class(g, "film.genre").expect("valid");
    }
    for a in AWARDS {
        b.add_class(a, "award.award").expect("valid");
    }
    b.add_class("Male", "people.gender").expect("valid");
    b.add_class("Female", "people.gender").expect("valid");

    let mut names: Vec<(String, &str)> = Vec::new();
    for first in FEMALE.iter().map(|f| (f, "Female")).chain(MALE.iter().map(|m| (m, "Male"))) {
        for last in SURNAMES {
            names.push((format!("{}_{last}", first.0), first.1));
        }
    }
    names.shuffle(rng);
    names.truncate(PEOPLE);
    let people: Vec<String> = names.iter().map(|(n, _)| n.clone()).collect();
    for (name, gender) in &names {
        b.add_class(name, "people.person").expect("valid");
        add(&mut b, name, "people.person.gender", ent(gender));
        add(&mut b, name, "people.person.place_of_birth", ent(CITIES.choose(rng).expect("non-empty")));
        let year = rng.gen_range(1930..=1995);
        let month = rng.gen_range(1..=12);
        let day = rng.gen_range(1..=28);
        let dob = Datetime::date(year, month, day).expect("valid date");
        add(&mut b, name, "people.person.date_of_birth", Object::Literal(Literal::Datetime(dob)));
    }
    let directors: Vec<String> = people[..DIRECTORS].to_vec();
    let actors: Vec<String> = people[DIRECTORS..].to_vec();
    for d in &directors {
        b.add_class(d, "film.director").expect("valid");
    }
    for p in people.iter().take(14) {
        add(&mut b, p, "people.person.awards_won", ent(AWARDS.choose(rng).expect("non-empty")));
    }

    let mut titles: Vec<String> = ADJECTIVES.iter().flat_map(|a| NOUNS.iter().map(move |n| format!("{a}_{n}"))).collect();
    titles.shuffle(rng);
    titles.truncate(FILMS);
    for (i, film) in titles.iter().enumerate() {
        b.add_class(film, "film.film").expect("valid");
        // every director gets at least two films
        let director = if i < 2 * DIRECTORS { &directors[i % DIRECTORS] } else { directors.choose(rng).expect("non-empty") };
        add(&mut b, film, "film.film.directed_by", ent(director));
        let cast_size = rng.gen_range(2..=3);
        let mut cast: Vec<&String> = actors.choose_multiple(rng, cast_size).collect();
        if rng.gen_bool(0.3) {
            cast.push(directors.choose(rng).expect("non-empty"));
        }
        for a in cast {
            b.add_class(a, "film.actor").expect("valid");
            add(&mut b, film, "film.film.starring", ent(a));
        }
        let released = Datetime::year(rng.gen_range(1960..=2020));
        add(&mut b, film, "film.film.release_date", Object::Literal(Literal::Datetime(released)));
        let runtime = rng.gen_range(80..=180) as f64;
        add(&mut b, film, "film.film.runtime", Object::Literal(Literal::Numeric(runtime)));
        add(&mut b, film, "film.film.genre", ent(GENRES.choose(rng).expect("non-empty")));
        add(&mut b, film, "film.film.country", ent(COUNTRIES.choose(rng).expect("non-empty")));
    }
    World { kb: b.build(), people, directors, films: titles }
}

/// One question template: fills itself from the world or gives up.
type Template = fn(&World, &mut ChaCha8Rng) -> Option<(String, String, Vec<String>)>;

fn pick<'a>(rng: &mut ChaCha8Rng, items: &'a [String]) -> &'a String {
    items.choose(rng).expect("non-empty")
}

fn pick_str<'a>(rng: &mut ChaCha8Rng, items: &[&'a str]) -> &'a str {
    items.choose(rng).expect("non-empty")
}

fn one(q: String, p: String, e: &str) -> Option<(String, String, Vec<String>)> {
    Some((q, p, vec![e.to_string()]))
}

fn member_values(w: &World, entities: &[String], rel: &str) -> Vec<Literal> {
    let r = w.kb.relation_id(rel).expect("known relation");
    entities
        .iter()
        .filter_map(|e| w.kb.entity_id(e))
        .flat_map(|e| w.kb.objects(e, r).iter().copied().collect::<Vec<_>>())
        .filter_map(|n| match n {
            crate::kb::Node::Literal(l) => Some(w.kb.literal(l).clone()),
            _ => None,
        })
        .collect()
}

fn year_of(l: &Literal) -> i32 {
    match l {
        Literal::Datetime(d) => d.year_value(),
        _ => 0,
    }
}

const TRAIN_TEMPLATES: [Template; 28] = [
    |w, r| {
        let f = pick(r, &w.films);
        one(format!("who directed {}", mention(f)), format!("(JOIN film.film.directed_by {f})"), f)
    },
    |w, r| {
        let p = pick(r, &w.directors);
        one(format!("which films did {} direct", mention(p)), format!("(JOIN film.film.directed_by_inv {p})"), p)
    },
    |w, r| {
        let p = pick(r, &w.people);
        one(format!("which films did {} star in", mention(p)), format!("(JOIN film.film.starring_inv {p})"), p)
    },
    |w, r| {
        let p = pick(r, &w.people);
        one(format!("where was {} born", mention(p)), format!("(JOIN people.person.place_of_birth {p})"), p)
    },
    |w, r| {
        let p = pick(r, &w.people);
        let prog = format!("(JOIN location.city.country (JOIN people.person.place_of_birth {p}))");
        one(format!("in which country was {} born", mention(p)), prog, p)
    },
    |w, r| {
        let f = pick(r, &w.films);
        one(format!("what genre is {}", mention(f)), format!("(JOIN film.film.genre {f})"), f)
    },
    |w, r| {
        let f = pick(r, &w.films);
        one(format!("when was {} released", mention(f)), format!("(JOIN film.film.release_date {f})"), f)
    },
    |w, r| {
        let p = pick(r, &w.people);
        one(format!("what awards has {} won", mention(p)), format!("(JOIN people.person.awards_won {p})"), p)
    },
    |_, r| {
        let a = pick_str(r, &AWARDS);
        one(format!("who has won the {}", mention(a)), format!("(JOIN people.person.awards_won_inv {a})"), a)
    },
    |w, r| {
        let p = pick(r, &w.people);
        let prog = format!("(JOIN film.film.directed_by (JOIN film.film.starring_inv {p}))");
        one(format!("who directed films starring {}", mention(p)), prog, p)
    },
    |w, r| {
        let f = pick(r, &w.films);
        one(format!("which directors appear in {}", mention(f)), format!("(AND film.director (JOIN film.film.starring {f}))"), f)
    },
    |_, r| {
        let c = pick_str(r, &CITIES);
        let prog = format!("(AND film.actor (JOIN people.person.place_of_birth_inv {c}))");
        one(format!("which actors were born in {}", mention(c)), prog, c)
    },
    |w, r| {
        let f = pick(r, &w.films);
        let cast: Vec<String> = w.kb.neighbors(node(w, f), w.kb.relation_id("film.film.starring")?).iter().map(|&n| w.kb.node_name(n)).collect();
        let mut two: Vec<&String> = cast.choose_multiple(r, 2).collect();
        two.sort();
        let (a, b) = (two.first()?, two.get(1)?);
        let prog = format!("(AND (JOIN film.film.starring_inv {a}) (JOIN film.film.starring_inv {b}))");
        Some((format!("which films star both {} and {}", mention(a), mention(b)), prog, vec![a.to_string(), b.to_string()]))
    },
    |w, r| {
        let p = pick(r, &w.directors);
        one(format!("how many films has {} directed", mention(p)), format!("(COUNT (JOIN film.film.directed_by_inv {p}))"), p)
    },
    |_, r| {
        let c = pick_str(r, &COUNTRIES);
        one(format!("how many cities are in {c}"), format!("(COUNT (JOIN location.city.country_inv {c}))"), c)
    },
    |_, r| {
        let x = *[0.5, 1.0, 1.5, 2.0, 2.5, 3.0].choose(r)?;
        let v = x * 1e6;
        Some((format!("how many cities have more than {} million people", x), format!("(COUNT (GT location.city.population {v}^^numeric))"), vec![]))
    },
    |w, r| {
        let p = pick(r, &w.people);
        let prog = format!("(ARGMAX (JOIN film.film.starring_inv {p}) film.film.runtime)");
        one(format!("which film starring {} has the longest runtime", mention(p)), prog, p)
    },
    |_, r| {
        let c = pick_str(r, &COUNTRIES);
        let prog = format!("(ARGMAX (JOIN location.city.country_inv {c}) location.city.population)");
        one(format!("which city in {c} has the largest population"), prog, c)
    },
    |w, r| {
        let p = pick(r, &w.directors);
        let prog = format!("(ARGMIN (JOIN film.film.directed_by_inv {p}) film.film.release_date)");
        one(format!("what is the earliest film directed by {}", mention(p)), prog, p)
    },
    |w, r| {
        let f = pick(r, &w.films);
        let prog = format!("(ARGMIN (JOIN film.film.starring {f}) people.person.date_of_birth)");
        one(format!("who is the oldest actor in {}", mention(f)), prog, f)
    },
    |_, r| {
        let n = r.gen_range(18..=34) * 5;
        Some((format!("which films run shorter than {n} minutes"), format!("(LT film.film.runtime {n}^^numeric)"), vec![]))
    },
    |_, r| {
        let y = r.gen_range(1965..=2015);
        Some((format!("which films were released in or before {y}"), format!("(LE film.film.release_date {y}^^datetime)"), vec![]))
    },
    |_, r| {
        let x = *[0.5, 1.0, 1.5, 2.0, 2.5, 3.0].choose(r)?;
        let v = x * 1e6;
        Some((format!("which cities have a population greater than {} million", x), format!("(GT location.city.population {v}^^numeric)"), vec![]))
    },
    |_, r| {
        let (y, m, d) = (r.gen_range(1935..=1990), r.gen_range(1..=12), r.gen_range(1..=28));
        let date = Datetime::date(y, m as u8, d as u8)?;
        Some((
            format!("which people were born on or after {} {d}, {y}", MONTH_NAMES[m - 1]),
            format!("(GE people.person.date_of_birth {date}^^datetime)"),
            vec![],
        ))
    },
    |w, r| {
        let f = pick(r, &w.films);
        let g = pick_str(r, &["Male", "Female"]);
        let prog = format!("(CONS (JOIN film.film.starring {f}) people.person.gender {g})");
        one(format!("which {} actors star in {}", g.to_lowercase(), mention(f)), prog, f)
    },
    |w, r| {
        let p = pick(r, &w.people);
        let g = pick_str(r, &GENRES);
        let prog = format!("(CONS (JOIN film.film.starring_inv {p}) film.film.genre {g})");
        one(format!("which {} films star {}", g.to_lowercase(), mention(p)), prog, p)
    },
    |w, r| {
        let p = pick(r, &w.directors);
        let films = set_of(w, &format!("(JOIN film.film.directed_by_inv {p})"))?;
        let years = member_values(w, &films, "film.film.release_date");
        let y = year_of(years.choose(r)?);
        let prog = format!("(TC (JOIN film.film.directed_by_inv {p}) film.film.release_date {y}^^datetime)");
        one(format!("which films directed by {} were released in {y}", mention(p)), prog, p)
    },
    |_, r| {
        let y = r.gen_range(1965..=2015);
        Some((format!("who directed films released after {y}"), format!("(JOIN film.film.directed_by (GT film.film.release_date {y}^^datetime))"), vec![]))
    },
];

const HELDOUT_TEMPLATES: [Template; 6] = [
    |w, r| {
        let p = pick(r, &w.directors);
        let prog = format!("(ARGMAX (JOIN film.film.directed_by_inv {p}) film.film.release_date)");
        one(format!("what is the latest film directed by {}", mention(p)), prog, p)
    },
    |_, r| {
        let n = r.gen_range(18..=34) * 5;
        Some((format!("how many films run shorter than {n} minutes"), format!("(COUNT (LT film.film.runtime {n}^^numeric))"), vec![]))
    },
    |w, r| {
        let p = pick(r, &w.directors);
        let g = pick_str(r, &GENRES);
        let prog = format!("(CONS (JOIN film.film.directed_by_inv {p}) film.film.genre {g})");
        one(format!("which {} films did {} direct", g.to_lowercase(), mention(p)), prog, p)
    },
    |_, r| {
        let y = r.gen_range(1965..=2015);
        Some((format!("who starred in films released after {y}"), format!("(JOIN film.film.starring (GT film.film.release_date {y}^^datetime))"), vec![]))
    },
    |_, r| {
        let c = pick_str(r, &CITIES);
        let prog = format!("(AND film.director (JOIN people.person.place_of_birth_inv {c}))");
        one(format!("which directors were born in {}", mention(c)), prog, c)
    },
    |w, r| {
        let p = pick(r, &w.people);
        let films = set_of(w, &format!("(JOIN film.film.starring_inv {p})"))?;
        let years = member_values(w, &films, "film.film.release_date");
        let y = year_of(years.choose(r)?);
        let prog = format!("(TC (JOIN film.film.starring_inv {p}) film.film.release_date {y}^^datetime)");
        one(format!("which films starring {} were released in {y}", mention(p)), prog, p)
    },
];

fn node(w: &World, name: &str) -> crate::kb::Node {
    crate::kb::Node::Entity(w.kb.entity_id(name).expect("generated entity"))
}

fn set_of(w: &World, program: &str) -> Option<Vec<String>> {
    let p = parse(program, &w.kb).ok()?;
    match execute_program(&w.kb, &p).ok()? {
        Denotation::Entities(s) if !s.is_empty() => Some(s.iter().map(|&e| w.kb.entity_name(e).to_string()).collect()),
        _ => None,
    }
}

fn fill(w: &World, rng: &mut ChaCha8Rng, templates: &[Template], n: usize, prefix: &str, seen: &mut HashSet<String>) -> Vec<Example> {
    let mut out = Vec::with_capacity(n);
    let mut t = 0;
    let mut misses = 0;
    while out.len() < n {
        let template = templates[t % templates.len()];
        t += 1;
        let Some((question, program, entities)) = template(w, rng) else { continue };
        let ok = parse(&program, &w.kb).ok().and_then(|p| execute_program(&w.kb, &p).ok()).is_some_and(|d| !d.is_empty());
        if !ok || !seen.insert(question.clone()) {
            misses += 1;
            assert!(misses < 100_000, "templates cannot fill the corpus");
            continue;
        }
        let entities = entities
            .into_iter()
            .map(|e| LinkedEntity { mention: mention(&e), entity: e, score: 1.0 })
            .collect();
        out.push(Example { id: format!("{prefix}-{:03}", out.len()), question, program, entities, literals: None });
    }
    out
}

/// Deterministic random vectors for every word piece of the questions,
/// schema items and entity names.
pub fn embeddings_for(kb: &KnowledgeBase, examples: &[Example], dim: usize, seed: u64) -> EmbeddingTable {
    let mut words: BTreeSet<String> = BTreeSet::new();
    for ex in examples {
        words.extend(tokenize(&ex.question));
    }
    for r in kb.relations() {
        words.extend(tokenize(&kb.relation_name(r.inverted())));
    }
    for c in kb.classes() {
        words.extend(tokenize(kb.class_name(c)));
    }
    for e in kb.entities() {
        words.extend(tokenize(kb.entity_name(e)));
    }
    EmbeddingTable::random(words.into_iter().collect(), dim, seed)
}

/// Builds the toy world and corpus from `seed`.
pub fn generate(seed: u64) -> Synthetic {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let world = build_world(&mut rng);
    let mut seen = HashSet::new();
    let train = fill(&world, &mut rng, &TRAIN_TEMPLATES, TRAIN_SIZE, "train", &mut seen);
    let heldout = fill(&world, &mut rng, &HELDOUT_TEMPLATES, HELDOUT_SIZE, "heldout", &mut seen);
    let all: Vec<Example> = train.iter().chain(&heldout).cloned().collect();
    let embeddings = embeddings_for(&world.kb, &all, EMBEDDING_DIM, seed);
    Synthetic { kb: world.kb, train, heldout, embeddings }
}
