//! Language identification from character trigram profiles.
//!
//! Built-in profiles are derived from short reference passages for ten
//! European languages. A text is classified by cosine similarity between its
//! trigram frequency vector and each profile.

use std::collections::HashMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

/// Texts shorter than this (in characters, after trimming) are undetermined.
pub const MIN_CHARS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageVerdict {
    pub tag: String,
    /// Relative margin of the best profile over the runner-up, in [0, 1].
    pub confidence: f64,
}

impl LanguageVerdict {
    pub fn undetermined() -> Self {
        LanguageVerdict { tag: "und".into(), confidence: 0.0 }
    }
}

type Profile = HashMap<[char; 3], f64>;

fn trigrams(text: &str) -> HashMap<[char; 3], f64> {
    let mut counts = HashMap::new();
    for word in text
        .split(|c: char| !c.is_alphabetic())
        .filter(|w| !w.is_empty())
    {
        let padded: Vec<char> = std::iter::once(' ')
            .chain(word.chars().flat_map(char::to_lowercase))
            .chain(std::iter::once(' '))
            .collect();
        for w in padded.windows(3) {
            *counts.entry([w[0], w[1], w[2]]).or_insert(0.0) += 1.0;
        }
    }
    counts
}

fn normalize(mut p: Profile) -> Profile {
    let norm = p.values().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        p.values_mut().for_each(|v| *v /= norm);
    }
    p
}

fn cosine(a: &Profile, b: &Profile) -> f64 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    small.iter().filter_map(|(k, v)| large.get(k).map(|w| v * w)).sum()
}

pub struct LanguageDetector {
    profiles: Vec<(String, Profile)>,
}

impl LanguageDetector {
    /// Builds a detector from (tag, reference text) pairs.
    pub fn from_samples<'a>(samples: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        let profiles = samples.into_iter().map(|(tag, text)| (tag.to_owned(), normalize(trigrams(text)))).collect();
        LanguageDetector { profiles }
    }

    pub fn builtin() -> &'static LanguageDetector {
        static DETECTOR: OnceLock<LanguageDetector> = OnceLock::new();
        DETECTOR.get_or_init(|| LanguageDetector::from_samples(SAMPLES.iter().copied()))
    }

    pub fn similarities(&self, text: &str) -> Vec<(String, f64)> {
        let profile = normalize(trigrams(text));
        let mut sims: Vec<_> = self.profiles.iter().map(|(tag, p)| (tag.clone(), cosine(&profile, p))).collect();
        sims.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        sims
    }

    pub fn detect(&self, text: &str) -> LanguageVerdict {
        if text.trim().chars().count() < MIN_CHARS {
            return LanguageVerdict::undetermined();
        }
        let sims = self.similarities(text);
        let Some((tag, best)) = sims.first().cloned() else {
            return LanguageVerdict::undetermined();
        };
        if best <= 0.0 {
            return LanguageVerdict::undetermined();
        }
        let second = sims.get(1).map_or(0.0, |s| s.1);
        LanguageVerdict { tag, confidence: ((best - second) / best).clamp(0.0, 1.0) }
    }
}

pub fn detect_language(text: &str) -> LanguageVerdict {
    LanguageDetector::builtin().detect(text)
}

const SAMPLES: &[(&str, &str)] = &[
    ("en", "All human beings are born free and equal in dignity and rights. They are endowed with reason and conscience \
        and should act towards one another in a spirit of brotherhood. Everyone is entitled to all the rights and freedoms \
        set forth in this declaration, without distinction of any kind, such as race, colour, sex, language, religion, \
        political or other opinion. The weather this morning was cold, but the children still walked to school with their \
        friends. She said that they would have to finish the work before the end of the week. We have been thinking about \
        what we should do with the old house near the river. There is nothing quite like a quiet evening with a good book \
        and a cup of tea. The government announced new plans for the economy, which include higher spending on health and \
        education. Most of the people who live in this town work in the factory or on the farms around it. If you want to \
        learn something new, you should practice every day and ask questions when you do not understand. The quick brown \
        fox jumps over the lazy dog. It was the best of times, it was the worst of times. Which of these would you rather \
        have, and why? This is the place where the story begins, with a young man and his journey through the mountains."),
    ("de", "Alle Menschen sind frei und gleich an Würde und Rechten geboren. Sie sind mit Vernunft und Gewissen begabt und \
        sollen einander im Geist der Brüderlichkeit begegnen. Jeder hat Anspruch auf die in dieser Erklärung verkündeten \
        Rechte und Freiheiten ohne irgendeinen Unterschied, etwa nach Rasse, Hautfarbe, Geschlecht, Sprache, Religion oder \
        politischer Überzeugung. Das Wetter war heute Morgen kalt, aber die Kinder gingen trotzdem mit ihren Freunden zur \
        Schule. Sie sagte, dass sie die Arbeit vor dem Ende der Woche fertig machen müssen. Wir haben darüber nachgedacht, \
        was wir mit dem alten Haus am Fluss machen sollen. Es gibt nichts Schöneres als einen ruhigen Abend mit einem guten \
        Buch und einer Tasse Tee. Die Regierung kündigte neue Pläne für die Wirtschaft an, die höhere Ausgaben für Gesundheit \
        und Bildung vorsehen. Die meisten Menschen, die in dieser Stadt leben, arbeiten in der Fabrik oder auf den Höfen in \
        der Umgebung. Wenn du etwas Neues lernen willst, solltest du jeden Tag üben und Fragen stellen, wenn du etwas nicht \
        verstehst. Hier beginnt die Geschichte eines jungen Mannes und seiner Reise durch die Berge."),
    ("fr", "Tous les êtres humains naissent libres et égaux en dignité et en droits. Ils sont doués de raison et de \
        conscience et doivent agir les uns envers les autres dans un esprit de fraternité. Chacun peut se prévaloir de tous \
        les droits et de toutes les libertés proclamés dans la présente déclaration, sans distinction aucune, notamment de \
        race, de couleur, de sexe, de langue, de religion ou d'opinion politique. Ce matin il faisait froid, mais les \
        enfants sont quand même allés à l'école avec leurs amis. Elle a dit qu'ils devaient terminer le travail avant la fin \
        de la semaine. Nous avons réfléchi à ce que nous devrions faire de la vieille maison près de la rivière. Il n'y a \
        rien de tel qu'une soirée tranquille avec un bon livre et une tasse de thé. Le gouvernement a annoncé de nouveaux \
        projets pour l'économie, qui prévoient des dépenses plus élevées pour la santé et l'éducation. La plupart des gens \
        qui vivent dans cette ville travaillent à l'usine ou dans les fermes des environs."),
    ("es", "Todos los seres humanos nacen libres e iguales en dignidad y derechos y, dotados como están de razón y \
        conciencia, deben comportarse fraternalmente los unos con los otros. Toda persona tiene los derechos y libertades \
        proclamados en esta declaración, sin distinción alguna de raza, color, sexo, idioma, religión, opinión política o de \
        cualquier otra índole. Esta mañana hacía frío, pero los niños fueron a la escuela con sus amigos de todos modos. \
        Ella dijo que tenían que terminar el trabajo antes del final de la semana. Hemos estado pensando en lo que debemos \
        hacer con la casa vieja cerca del río. No hay nada como una tarde tranquila con un buen libro y una taza de té. El \
        gobierno anunció nuevos planes para la economía, que incluyen un mayor gasto en salud y educación. La mayoría de las \
        personas que viven en este pueblo trabajan en la fábrica o en las granjas de los alrededores."),
    ("it", "Tutti gli esseri umani nascono liberi ed eguali in dignità e diritti. Essi sono dotati di ragione e di \
        coscienza e devono agire gli uni verso gli altri in spirito di fratellanza. Ad ogni individuo spettano tutti i \
        diritti e tutte le libertà enunciate nella presente dichiarazione, senza distinzione alcuna, per ragioni di razza, di \
        colore, di sesso, di lingua, di religione, di opinione politica o di altro genere. Questa mattina faceva freddo, ma \
        i bambini sono andati comunque a scuola con i loro amici. Lei ha detto che dovevano finire il lavoro prima della \
        fine della settimana. Abbiamo pensato a cosa fare della vecchia casa vicino al fiume. Non c'è niente di meglio di \
        una serata tranquilla con un buon libro e una tazza di tè. Il governo ha annunciato nuovi piani per l'economia, che \
        prevedono una spesa maggiore per la sanità e l'istruzione. La maggior parte delle persone che vivono in questa città \
        lavora nella fabbrica o nelle fattorie dei dintorni."),
    ("pt", "Todos os seres humanos nascem livres e iguais em dignidade e em direitos. Dotados de razão e de consciência, \
        devem agir uns para com os outros em espírito de fraternidade. Todos os seres humanos podem invocar os direitos e \
        as liberdades proclamados na presente declaração, sem distinção alguma, nomeadamente de raça, de cor, de sexo, de \
        língua, de religião, de opinião política ou outra. Hoje de manhã estava frio, mas as crianças foram para a escola \
        com os seus amigos mesmo assim. Ela disse que eles tinham de acabar o trabalho antes do fim da semana. Temos pensado \
        no que devemos fazer com a casa velha perto do rio. Não há nada como uma noite tranquila com um bom livro e uma \
        chávena de chá. O governo anunciou novos planos para a economia, que incluem mais despesa com a saúde e a educação. \
        A maioria das pessoas que vivem nesta cidade trabalha na fábrica ou nas quintas à volta."),
    ("nl", "Alle mensen worden vrij en gelijk in waardigheid en rechten geboren. Zij zijn begiftigd met verstand en \
        geweten, en behoren zich jegens elkander in een geest van broederschap te gedragen. Een ieder heeft aanspraak op \
        alle rechten en vrijheden, in deze verklaring opgesomd, zonder enig onderscheid van welke aard ook, zoals ras, \
        kleur, geslacht, taal, godsdienst of politieke overtuiging. Vanochtend was het koud, maar de kinderen liepen toch \
        met hun vrienden naar school. Ze zei dat ze het werk voor het einde van de week moesten afmaken. We hebben nagedacht \
        over wat we met het oude huis bij de rivier moeten doen. Er gaat niets boven een rustige avond met een goed boek en \
        een kopje thee. De regering kondigde nieuwe plannen voor de economie aan, met hogere uitgaven voor gezondheid en \
        onderwijs. De meeste mensen die in deze stad wonen, werken in de fabriek of op de boerderijen in de omgeving."),
    ("sv", "Alla människor är födda fria och lika i värde och rättigheter. De har utrustats med förnuft och samvete och \
        bör handla gentemot varandra i en anda av broderskap. Var och en är berättigad till alla de rättigheter och \
        friheter som uttalas i denna förklaring utan åtskillnad av något slag, såsom ras, hudfärg, kön, språk, religion, \
        politisk eller annan uppfattning. I morse var det kallt, men barnen gick ändå till skolan med sina vänner. Hon sa \
        att de måste göra klart arbetet före slutet av veckan. Vi har funderat på vad vi ska göra med det gamla huset vid \
        floden. Det finns inget som en lugn kväll med en bra bok och en kopp te. Regeringen presenterade nya planer för \
        ekonomin, som innebär högre utgifter för hälsa och utbildning. De flesta som bor i den här staden arbetar på \
        fabriken eller på gårdarna runt omkring."),
    ("pl", "Wszyscy ludzie rodzą się wolni i równi pod względem swej godności i swych praw. Są oni obdarzeni rozumem i \
        sumieniem i powinni postępować wobec innych w duchu braterstwa. Każdy człowiek posiada wszystkie prawa i wolności \
        zawarte w niniejszej deklaracji bez względu na jakiekolwiek różnice rasy, koloru skóry, płci, języka, wyznania, \
        poglądów politycznych lub innych przekonań. Dziś rano było zimno, ale dzieci i tak poszły do szkoły ze swoimi \
        przyjaciółmi. Powiedziała, że muszą skończyć pracę przed końcem tygodnia. Zastanawialiśmy się, co zrobić ze starym \
        domem nad rzeką. Nie ma nic lepszego niż spokojny wieczór z dobrą książką i filiżanką herbaty. Rząd ogłosił nowe \
        plany dla gospodarki, które obejmują wyższe wydatki na zdrowie i edukację. Większość ludzi mieszkających w tym \
        mieście pracuje w fabryce lub w okolicznych gospodarstwach."),
    ("tr", "Bütün insanlar hür, haysiyet ve haklar bakımından eşit doğarlar. Akıl ve vicdana sahiptirler ve birbirlerine \
        karşı kardeşlik zihniyeti ile hareket etmelidirler. Herkes, ırk, renk, cinsiyet, dil, din, siyasi veya diğer herhangi \
        bir akide bakımından hiçbir ayrım gözetilmeksizin bu beyannamede ilan olunan tüm haklardan ve hürriyetlerden \
        yararlanabilir. Bu sabah hava soğuktu, ama çocuklar yine de arkadaşlarıyla birlikte okula yürüdüler. Kadın, işi \
        hafta sonundan önce bitirmeleri gerektiğini söyledi. Nehrin yanındaki eski evle ne yapmamız gerektiğini düşünüyoruz. \
        İyi bir kitap ve bir fincan çay ile geçirilen sakin bir akşam gibisi yoktur. Hükümet, sağlık ve eğitime daha fazla \
        harcama içeren yeni ekonomi planlarını açıkladı. Bu kasabada yaşayan insanların çoğu fabrikada ya da çevredeki \
        çiftliklerde çalışıyor."),
];
