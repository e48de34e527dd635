//! Generator for the bundled mini crawl: twelve HTML pages in English and
//! French, a mirror of the images they reference, and a benchmark pHash
//! list. Output is a pure function of the tables below.

use std::io::Write;
use std::path::{Path, PathBuf};

use flate2::write::GzEncoder;
use flate2::Compression;
use image::{ImageEncoder, Rgb, RgbImage};
use mmcorpus::images::phash_bytes;
use mmcorpus::langid::{classify_document, LidOptions};
use mmcorpus::scorer::{stub_lid, RetryPolicy, StubScorer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const LANGS: [&str; 2] = ["eng_Latn", "fra_Latn"];
pub const EN: &str = "eng_Latn";
pub const FR: &str = "fra_Latn";

/// (mirror path, pixel seed, width, height)
pub const IMAGES: &[(&str, u64, u32, u32)] = &[
    ("img-a.test/harbour/boats.png", 101, 200, 160),
    ("img-a.test/harbour/quay.png", 20206, 180, 180),
    ("img-a.test/garden/roses.png", 20302, 160, 200),
    ("img-a.test/garden/shed.png", 20401, 200, 200),
    ("img-b.test/misc/night.png", 105, 160, 160),
    ("img-b.test/kitchen/bread.png", 2070104, 220, 170),
    ("img-b.test/kitchen/bread-copy.png", 2070104, 220, 170),
    ("img-b.test/kitchen/logo-small.png", 108, 200, 200),
    ("img-b.test/kitchen/thumb.png", 109, 100, 100),
    ("img-b.test/kitchen/strip.png", 110, 640, 160),
    ("img-b.test/kitchen/pan.png", 111, 180, 160),
    ("img-b.test/kitchen/oven.png", 112, 170, 190),
    ("img-b.test/private/secret.png", 113, 160, 160),
    ("img-a.test/cycling/bike.png", 2150340, 210, 160),
    ("img-a.test/cycling/odd.png", 21532, 160, 210),
    ("img-c.test/marche/fruits.png", 21607, 200, 170),
    ("img-c.test/marche/legumes.png", 21706, 170, 170),
    ("img-c.test/montagne/sommet.png", 21803, 220, 160),
    ("img-c.test/montagne/refuge.png", 119, 160, 160),
    ("img-c.test/boulangerie/pain.png", 22018, 190, 170),
];

/// Images listed in the benchmark set.
pub const BENCHMARK: &[&str] = &["img-b.test/kitchen/pan.png"];
/// Image planted with content unrelated to its page.
pub const MISMATCHED: &str = "img-a.test/cycling/odd.png";

const ROBOTS: &[(&str, &str)] = &[("img-b.test", "User-agent: *\nDisallow: /private/\n")];

pub enum Block {
    H1(&'static str),
    P(&'static str),
    /// Exact copy of the text node at this index in the same page.
    Again(usize),
    /// Text node at this index with one extra trailing character.
    NearAgain(usize, char),
    Img(&'static str),
    Raw(&'static str),
}
use Block::*;

pub struct Page {
    pub name: &'static str,
    pub url: &'static str,
    pub lang: &'static str,
    pub blocks: Vec<Block>,
    /// Copy all text of another page, optionally swapping one word.
    pub copy_of: Option<(&'static str, Option<(&'static str, &'static str)>)>,
}

fn page(name: &'static str, url: &'static str, lang: &'static str, blocks: Vec<Block>) -> Page {
    Page {
        name,
        url,
        lang,
        blocks,
        copy_of: None,
    }
}

pub fn pages() -> Vec<Page> {
    vec![
        page("harbour", "http://site-a.test/harbour.html", EN, vec![
            H1("Morning at the old harbour"),
            P("The fishing boats come back to the old harbour just after sunrise, and the quay fills with crates, ropes and the smell of salt. Gulls circle above the nets while the crews sort the catch."),
            Img("http://img-a.test/harbour/boats.png"),
            P("Most of the boats are small wooden hulls painted in bright colours. Their owners repaint them every spring, and each family keeps its own shade of blue, green or red."),
            P("Behind the quay, a row of narrow houses leans against the hill. The ground floors hold workshops where nets are mended by hand, a skill passed down through many generations."),
            Again(2),
            Img("//img-a.test/harbour/quay.png"),
            P("In the afternoon the harbour grows quiet. The tide goes out, the boats settle on the mud, and children search the rock pools for crabs and small shells left behind by the sea."),
            P("Visitors who arrive early can buy fish straight from the boats. Prices are written in chalk on small boards, and the best pieces are usually gone before the cafes open."),
            P("Share"),
        ]),
        Page {
            copy_of: Some(("harbour", None)),
            ..page("harbour-mirror", "http://site-b.test/copies/harbour.html", EN, vec![])
        },
        page("garden", "http://site-a.test/garden.html", EN, vec![
            H1("A small garden through the seasons"),
            P("Our garden is only a narrow strip of land behind the house, but it changes completely from one season to the next. In winter it is bare and brown, with only the holly showing any colour."),
            Img("http://img-a.test/garden/roses.png"),
            P("By early spring the bulbs push through the cold soil. Snowdrops come first, then crocuses, and finally the daffodils that line the path to the old wooden shed at the bottom."),
            P("The roses along the fence need careful pruning every year. We cut them back hard in late winter so that the new growth is strong and the flowers stay healthy through the summer."),
            NearAgain(3, 's'),
            P("Summer brings the vegetables: beans climbing their poles, courgettes hiding under broad leaves, and tomatoes ripening slowly against the warm brick wall of the kitchen."),
            Img("http://img-a.test/garden/shed.png"),
            P("When autumn arrives we gather the last apples, rake the leaves into heaps and plant the bulbs again. The cycle starts over, and the garden rests until the light returns."),
        ]),
        Page {
            copy_of: Some(("garden", Some(("beans", "peas")))),
            ..page("garden-reprint", "http://site-c.test/reprints/garden.html", EN, vec![])
        },
        page("river", "http://site-b.test/river.html", EN, vec![
            H1("An evening walk by the river"),
            P("The path along the river starts at the stone bridge and follows the water for several miles. In the evening it is busy with dog walkers, runners and families on bicycles."),
            Img("http://img-b.test/misc/night.png"),
            P("Willows hang low over the bank, and in places the branches almost touch the surface. Ducks gather near the old mill, waiting for the bread that children bring them."),
            P("Halfway along, a faded poster on the boathouse wall still advertises an erotic film festival that closed long ago, and nobody has bothered to take it down."),
            P("Further on, the path crosses a meadow where cows graze until dusk. The grass is wet with dew by the time the light fades and the first bats appear over the water."),
            P("Most walkers turn back at the lock gates, where a small cafe sells tea and cake. From there the lights of the town are just visible between the trees."),
        ]),
        page("kitchen", "http://site-b.test/kitchen.html", EN, vec![
            H1("Baking bread at home"),
            P("Baking bread at home takes patience more than skill. Flour, water, salt and yeast are all you need, together with a warm corner of the kitchen and a free afternoon."),
            Img("http://img-b.test/kitchen/bread.png"),
            Img("http://img-b.test/kitchen/bread.png"),
            Img("http://img-b.test/kitchen/bread-copy.png"),
            P("Mix the dough until it comes together, then knead it on the table for about ten minutes. It should feel smooth and spring back slowly when you press it with a finger."),
            Img("http://img-b.test/kitchen/logo-small.png"),
            Img("http://img-b.test/kitchen/thumb.png"),
            P("Leave the dough in a covered bowl until it has doubled in size. On a cold day this can take a couple of hours, so there is plenty of time for a walk or a cup of tea."),
            Img("http://img-b.test/kitchen/strip.png"),
            Img("http://img-b.test/kitchen/missing.png"),
            Img("http://img-b.test/private/secret.png"),
            P("Shape the loaf gently, place it on a floured tray and let it rise once more. Meanwhile heat the oven as high as it will go, with a tin of water on the lowest shelf."),
            Img("http://img-b.test/kitchen/pan.png"),
            P("Bake until the crust is deep brown and the loaf sounds hollow when tapped underneath. Let it cool on a rack before cutting, however tempting the smell may be."),
            Img("http://img-b.test/kitchen/oven.png"),
        ]),
        page("cycling", "http://site-a.test/cycling.html", EN, vec![
            H1("Cycling along the coast road"),
            P("The coast road is one of the most pleasant rides in the region. It climbs gently out of the town, passes the lighthouse and then runs along the cliffs for most of the way."),
            Img("http://img-a.test/cycling/bike.png"),
            P("A light touring bike is ideal for the route. Carry plenty of water, a spare tube and a warm layer, because the wind off the sea can turn cold even in the middle of summer."),
            P("The hardest section is the long hill after the fishing village. Take it slowly, stay in a low gear and enjoy the view of the bay opening up behind you as you climb."),
            Img("http://img-a.test/cycling/odd.png"),
            P("At the top there is a small car park with benches and a stall selling ice cream. Most riders stop here for a rest before the fast descent towards the beach."),
            P("The return journey follows the same road, but the views feel completely different in the evening light, with the sun low over the water and the cliffs glowing orange."),
        ]),
        page("marche", "http://site-d.test/marche.html", FR, vec![
            H1("Le marché du samedi matin"),
            P("Chaque samedi matin, la place du village se remplit de stands colorés. Les producteurs arrivent avant l'aube pour installer leurs tables sous les grands platanes."),
            Img("http://img-c.test/marche/fruits.png"),
            P("On y trouve des fruits de saison, des fromages de la région et du pain encore chaud. Les habitants viennent avec leurs paniers et prennent le temps de discuter."),
            P("Le marchand de légumes connaît tous ses clients par leur prénom. Il conseille les meilleures tomates pour une salade et garde toujours quelques herbes pour les habitués."),
            Img("http://img-c.test/marche/legumes.png"),
            P("Vers midi, les allées deviennent plus calmes. Les derniers acheteurs profitent des prix plus bas, tandis que les enfants courent autour de la fontaine au centre de la place."),
            P("Quand les stands sont démontés, la place retrouve son silence. Il ne reste que l'odeur des fleurs et quelques cagettes vides empilées près du café."),
        ]),
        page("montagne", "http://site-d.test/montagne.html", FR, vec![
            H1("Une journée en montagne"),
            P("Le départ se fait tôt, à la lumière des lampes frontales. Le sentier monte d'abord à travers une forêt de sapins où l'air est frais et le silence presque complet."),
            Img("http://img-c.test/montagne/sommet.png"),
            P("Après deux heures de marche, les arbres laissent place aux alpages. Les vaches portent des cloches dont le son accompagne les randonneurs jusqu'au col."),
            P("Le refuge se trouve juste sous le sommet. Le gardien y sert une soupe chaude et des tartines, et les grandes fenêtres offrent une vue magnifique sur la vallée."),
            Img("http://img-c.test/montagne/refuge.png"),
            P("La descente demande plus d'attention que la montée. Les pierres roulent sous les chaussures, et il vaut mieux prendre son temps pour ménager les genoux."),
            P("En fin de journée, on retrouve le village avec les jambes lourdes mais la tête pleine d'images. Une bonne nuit de sommeil suffit pour vouloir repartir."),
        ]),
        page("boulangerie", "http://site-e.test/boulangerie.html", FR, vec![
            H1("La boulangerie du quartier"),
            P("La boulangerie ouvre ses portes bien avant le lever du soleil. Le boulanger commence son travail au milieu de la nuit pour que le pain soit prêt à l'heure."),
            P("Les baguettes sortent du four par fournées successives. Leur croûte dorée craque sous les doigts, et l'odeur se répand dans toute la rue jusqu'à la petite place."),
            Img("http://img-c.test/boulangerie/pain.png"),
            P("Le samedi, la file d'attente s'allonge jusque sur le trottoir. Les clients patientent en discutant, certains repartent avec des croissants encore tièdes."),
            P("La boulangère connaît les habitudes de chacun. Elle met de côté le pain de campagne pour les uns et les petits gâteaux aux amandes pour les autres."),
            P("Le soir, les invendus sont donnés à une association du quartier. Rien ne se perd, et la boutique ferme ses portes avant de recommencer le lendemain."),
        ]),
        page("note", "http://site-e.test/note.html", FR, vec![
            H1("Fermé"),
            P("La boutique est fermée aujourd'hui."),
        ]),
        page("annonce", "http://site-e.test/annonce.html", FR, vec![
            H1("Avis aux habitants du quartier"),
            P("La réunion du comité des fêtes aura lieu dans la salle municipale. Tous les habitants sont invités à venir proposer leurs idées pour la prochaine fête du village."),
            Raw("<script>var menu = ['accueil', 'agenda', 'contact', 'plan', 'horaires', 'archives', 'photos', 'liens', 'mentions'];</script>"),
            Raw("<table><tr><td>Lundi</td><td>fermé</td></tr><tr><td>Mardi</td><td>ouvert</td></tr><tr><td>Mercredi</td><td>ouvert</td></tr></table>"),
        ]),
    ]
}

const EN_TAILS: &[&str] = &[
    " It is worth the trip.",
    " Nobody seems to mind.",
    " That is part of the charm.",
    " Few people notice it.",
    " The locals love it.",
    " It never gets old.",
    " We go back every year.",
];
const FR_TAILS: &[&str] = &[
    " C'est un vrai plaisir.",
    " Personne ne s'en plaint.",
    " Tout le monde adore ça.",
    " On y revient toujours.",
    " C'est le charme du lieu.",
    " Les habitants y tiennent.",
    " Rien ne presse ici.",
];

fn stub_top(text: &str) -> String {
    let table: Vec<String> = LANGS.iter().map(|s| s.to_string()).collect();
    stub_lid(text, &table).unwrap()[0].0.clone()
}

/// Appends the first closing sentence (or pair) that makes the stub
/// identifier agree with the page's language.
fn settle(text: &str, lang: &str) -> String {
    if text.len() < 40 || stub_top(text) == lang {
        return text.to_string();
    }
    let tails = if lang == EN { EN_TAILS } else { FR_TAILS };
    let mut options: Vec<String> = tails.iter().map(|t| t.to_string()).collect();
    for a in tails {
        for b in tails {
            if a != b {
                options.push(format!("{a}{b}"));
            }
        }
    }
    for t in options {
        let candidate = format!("{text}{t}");
        if stub_top(&candidate) == lang {
            return candidate;
        }
    }
    panic!("no closing sentence settles {text:?} as {lang}");
}

/// (tag, text) or image src for every block, after settling.
#[derive(Clone, Debug)]
pub enum Item {
    Text(&'static str, String),
    Image(String),
    Raw(&'static str),
}

fn materialize(p: &Page, done: &[(&'static str, Vec<Item>)]) -> Vec<Item> {
    if let Some((src, swap)) = &p.copy_of {
        let items = &done.iter().find(|(n, _)| n == src).expect("copy source first").1;
        return items
            .iter()
            .map(|it| match (it, swap) {
                (Item::Text(tag, t), Some((from, to))) => Item::Text(tag, t.replacen(from, to, 1)),
                (other, _) => other.clone(),
            })
            .collect();
    }
    let mut texts: Vec<String> = Vec::new();
    let mut out = Vec::new();
    for b in &p.blocks {
        match b {
            H1(t) => {
                texts.push(t.to_string());
                out.push(Item::Text("h1", t.to_string()));
            }
            P(t) => {
                let s = settle(t, p.lang);
                texts.push(s.clone());
                out.push(Item::Text("p", s));
            }
            Again(i) => {
                let s = texts[*i].clone();
                texts.push(s.clone());
                out.push(Item::Text("p", s));
            }
            NearAgain(i, c) => {
                let base = texts[*i].trim_end_matches('.').to_string();
                let s = format!("{base}{c}.");
                texts.push(s.clone());
                out.push(Item::Text("p", s));
            }
            Img(src) => out.push(Item::Image(src.to_string())),
            Raw(r) => out.push(Item::Raw(r)),
        }
    }
    out
}

fn html(items: &[Item]) -> String {
    let mut body = String::new();
    for it in items {
        match it {
            Item::Text(tag, t) => body.push_str(&format!("<{tag}>{}</{tag}>\n", escape(t))),
            Item::Image(src) => body.push_str(&format!("<img src=\"{src}\" alt=\"\">\n")),
            Item::Raw(r) => {
                body.push_str(r);
                body.push('\n');
            }
        }
    }
    format!(
        "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n</head>\n<body>\n<nav><a href=\"/\">home</a></nav>\n{body}</body>\n</html>\n"
    )
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn warc_record(kind: &str, n: usize, uri: &str, block: &[u8], extra: &str) -> Vec<u8> {
    let mut out = format!(
        "WARC/1.0\r\nWARC-Type: {kind}\r\nWARC-Record-ID: <urn:uuid:00000000-0000-4000-8000-{n:012}>\r\nWARC-Date: 2024-01-01T00:00:00Z\r\nWARC-Target-URI: {uri}\r\n{extra}Content-Length: {}\r\n\r\n",
        block.len()
    )
    .into_bytes();
    out.extend_from_slice(block);
    out.extend_from_slice(b"\r\n\r\n");
    out
}

pub fn synth_png(seed: u64, w: u32, h: u32) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid: Vec<[u8; 3]> = (0..16).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
    let img = RgbImage::from_fn(w, h, |x, y| {
        let c = grid[((y * 4 / h) * 4 + x * 4 / w) as usize];
        let shade = ((x + y) % 16) as u8;
        Rgb([c[0].saturating_add(shade), c[1], c[2].saturating_sub(shade)])
    });
    let mut buf = Vec::new();
    image::codecs::png::PngEncoder::new(&mut buf)
        .write_image(img.as_raw(), w, h, image::ExtendedColorType::Rgb8)
        .unwrap();
    buf
}

fn write(path: &Path, bytes: &[u8]) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(path, bytes).unwrap();
}

pub fn warc_path(dir: &Path) -> PathBuf {
    dir.join("dump").join("mini.warc.gz")
}

/// Writes the whole fixture under `dir` using `seeds` for image pixels.
pub fn generate_with(dir: &Path, seeds: &[(&str, u64, u32, u32)]) {
    let mut done: Vec<(&'static str, Vec<Item>)> = Vec::new();
    let mut warc = Vec::new();
    warc.extend(warc_record(
        "warcinfo",
        0,
        "",
        b"software: fixture\r\nformat: WARC File Format 1.0\r\n",
        "Content-Type: application/warc-fields\r\n",
    ));
    let mut n = 1;
    for p in pages() {
        let items = materialize(&p, &done);
        let body = html(&items);
        let request = format!("GET / HTTP/1.1\r\nHost: {}\r\n\r\n", url::Url::parse(p.url).unwrap().host_str().unwrap());
        warc.extend(warc_record("request", n, p.url, request.as_bytes(), "Content-Type: application/http; msgtype=request\r\n"));
        n += 1;
        let block = format!(
            "HTTP/1.1 200 OK\r\nContent-Type: text/html; charset=utf-8\r\nContent-Length: {}\r\n\r\n{body}",
            body.len()
        );
        warc.extend(warc_record("response", n, p.url, block.as_bytes(), "Content-Type: application/http; msgtype=response\r\n"));
        n += 1;
        done.push((p.name, items));
    }
    let mut enc = GzEncoder::new(Vec::new(), Compression::default());
    enc.write_all(&warc).unwrap();
    write(&warc_path(dir), &enc.finish().unwrap());

    let mut bench = String::new();
    for (path, seed, w, h) in seeds {
        let png = synth_png(*seed, *w, *h);
        if BENCHMARK.contains(path) {
            bench.push_str(&format!("{:016x}\n", phash_bytes(&png).unwrap()));
        }
        write(&dir.join("mirror").join(path), &png);
    }
    for (host, text) in ROBOTS {
        write(&dir.join("mirror").join(host).join("robots.txt"), text.as_bytes());
    }
    write(&dir.join("benchmark_phashes.txt"), bench.as_bytes());
    write(&dir.join("golden.toml"), CONFIG.as_bytes());
}

pub fn generate(dir: &Path) {
    generate_with(dir, IMAGES)
}

pub const CONFIG: &str = r#"dumps = ["dump/mini.warc.gz"]
output_dir = "out"
seed = 7
stub_mode = true
stub_languages = ["eng_Latn", "fra_Latn"]
mirror_dir = "mirror"
contamination_file = "benchmark_phashes.txt"
per_host_delay_ms = 0
scorer_retries = 1
"#;

/// Every page's intended language according to the stub, as a sanity
/// check on the settled text.
pub fn stub_language_of(items_html: &str, url: &str) -> Option<String> {
    let block = format!("HTTP/1.1 200 OK\r\nContent-Type: text/html\r\n\r\n{items_html}");
    let rec = mmcorpus::warc::WarcRecordRef::from_http_block("<urn:x>", url, block.into_bytes())?;
    let doc = mmcorpus::warc::extract_document(&rec, &Default::default(), &Default::default()).ok()?;
    let scorer = StubScorer::new(64).with_languages(LANGS.iter().map(|s| s.to_string()).collect());
    let opts = LidOptions {
        top_k: 3,
        retry: RetryPolicy::none(),
    };
    classify_document(doc, &scorer, &opts).ok()?.lang
}

pub fn page_html() -> Vec<(&'static str, &'static str, &'static str, String)> {
    let mut done: Vec<(&'static str, Vec<Item>)> = Vec::new();
    let mut out = Vec::new();
    for p in pages() {
        let items = materialize(&p, &done);
        out.push((p.name, p.url, p.lang, html(&items)));
        done.push((p.name, items));
    }
    out
}
