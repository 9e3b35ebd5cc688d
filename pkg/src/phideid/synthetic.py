"""Template-based synthetic clinical notes in the same format as the real corpus.

Gold spans are exact by construction: each note is assembled piece by piece
and every filled placeholder records its own offsets.
"""

from __future__ import annotations

import random
import re
from typing import Callable, Iterable

from .corpus import AnnotatedDocument, PhiSpan, validate_spans
from .errors import ConfigError
from .labels import PHI_CLASSES, TAGGABLE_CLASSES

FIRST = [
    "James", "Mary", "John", "Patricia", "Robert", "Jennifer", "Michael", "Linda", "William",
    "Elizabeth", "David", "Barbara", "Richard", "Susan", "Joseph", "Jessica", "Thomas", "Sarah",
    "Charles", "Karen", "Daniel", "Nancy", "Matthew", "Lisa", "Anthony", "Betty", "Mark",
    "Sandra", "Paul", "Ashley", "Steven", "Kimberly", "Andrew", "Donna", "Joshua", "Emily",
    "Kenneth", "Carol", "Kevin", "Michelle", "Brian", "Amanda", "Omar", "Priya", "Wei", "Fatima",
]
LAST = [
    "Smith", "Johnson", "Williams", "Brown", "Jones", "Garcia", "Miller", "Davis", "Rodriguez",
    "Martinez", "Hernandez", "Lopez", "Gonzalez", "Wilson", "Anderson", "Thomas", "Taylor",
    "Moore", "Jackson", "Martin", "Lee", "Perez", "Thompson", "White", "Harris", "Sanchez",
    "Clark", "Ramirez", "Lewis", "Robinson", "Walker", "Young", "Allen", "King", "Wright",
    "Scott", "Torres", "Nguyen", "Hill", "Flores", "Green", "Adams", "Nelson", "Baker", "Hall",
    "Rivera", "Campbell", "Mitchell", "Carter", "Roberts", "Okafor", "Kowalski", "Haddad",
]
MONTHS = ["January", "February", "March", "April", "May", "June", "July", "August",
          "September", "October", "November", "December"]
CITIES = ["Boston", "Springfield", "Worcester", "New York City", "San Diego", "Chicago", "Lowell",
          "Providence", "Salem", "Cambridge", "Fall River", "Portland", "Denver", "Austin",
          "Hartford", "Quincy", "New Bedford", "Albany", "Buffalo", "Nashua"]
STATES = ["MA", "Massachusetts", "New Hampshire", "NH", "RI", "Rhode Island", "CT", "Connecticut",
          "Texas", "Maine", "Vermont", "New York", "California", "Florida", "Ohio"]
COUNTRIES = ["Canada", "Mexico", "United Kingdom", "India", "Brazil", "Haiti", "Ireland",
             "Portugal", "China", "Vietnam", "Dominican Republic", "Italy"]
HOSPITAL_STEMS = ["Mercy", "Riverside", "Lakeview", "Northgate", "Saint Anne", "Bayview",
                  "Hillcrest", "Brookside", "Fairmont", "Harborview", "Kingsley", "Westfield"]
HOSPITAL_SUFFIX = ["General Hospital", "Medical Center", "Hospital", "Community Hospital",
                   "Memorial Hospital", "Health Center"]
ORGANIZATIONS = ["Partners Healthcare", "Acme Logistics", "General Electric", "Boston Public Schools",
                 "Harbor Bank", "Northeast Utilities", "City Transit Authority", "Fidelity",
                 "Raytheon", "Stop and Shop", "Liberty Mutual", "Dunkin Donuts"]
LOCATIONS_OTHER = ["Fenway Park", "Logan Airport", "Cape Cod", "Walden Pond", "the Berkshires",
                   "Martha's Vineyard", "Boston Common", "Quabbin Reservoir"]
PROFESSIONS = ["Orthopedic Surgeon", "teacher", "software engineer", "nurse", "electrician",
               "accountant", "truck driver", "firefighter", "police officer", "carpenter",
               "retired machinist", "bus driver", "chef", "librarian", "plumber", "social worker"]
DOMAINS = ["mail.com", "example.org", "inbox.net", "webmail.com", "post.org"]
URL_STEMS = ["healthportal", "mychart", "patientrecords", "carelink", "clinicinfo", "wellness"]

FILLER = [
    "Patient reports intermittent chest pain radiating to the left arm for the past three days.",
    "She denies fever, chills, nausea or vomiting and has been tolerating a regular diet.",
    "Blood pressure was 132/84 with a heart rate of 78 and oxygen saturation of 97 percent on room air.",
    "Lungs are clear to auscultation bilaterally without wheezes, rales or rhonchi.",
    "Heart has a regular rate and rhythm with no murmurs, rubs or gallops appreciated.",
    "Abdomen is soft, non-tender and non-distended with normal bowel sounds.",
    "Continue metoprolol 25 mg twice daily and lisinopril 10 mg once daily.",
    "Hemoglobin A1c was 7.2 which is improved compared with the prior measurement.",
    "He was counseled on smoking cessation and the importance of regular exercise.",
    "Lipid panel showed LDL of 118 and HDL of 42 so atorvastatin was increased.",
    "There is mild bilateral lower extremity edema without calf tenderness.",
    "Electrocardiogram demonstrated normal sinus rhythm without acute ST changes.",
    "The plan is to repeat basic metabolic panel in two weeks to monitor potassium.",
    "Her diabetes remains under fair control on metformin 1000 mg twice daily.",
    "Neurologic examination is non-focal with intact cranial nerves and normal gait.",
    "He reports adherence to his medications and denies any side effects.",
    "Chest radiograph showed no evidence of pneumonia or pleural effusion.",
    "We discussed the risks and benefits of cardiac catheterization in detail.",
    "Pain is currently rated four out of ten and is controlled with acetaminophen.",
    "Renal function is stable with creatinine of 1.1 and normal electrolytes.",
    "She will follow up in the clinic after completing physical therapy.",
    "Skin is warm and dry without rash, and extremities show good capillary refill.",
    "Thyroid studies were within normal limits and no changes were made.",
    "Influenza and pneumococcal vaccines were reviewed and are up to date.",
    "He continues to walk thirty minutes most days without exertional symptoms.",
    "Review of systems is otherwise negative except as noted above.",
    "Assessment is consistent with stable angina and well controlled hypertension.",
    "Family history is notable for coronary artery disease in both parents.",
    "Sleep has been poor and she reports daytime fatigue without snoring.",
    "Urinalysis was negative for leukocytes, nitrites and blood.",
]
SECTIONS = ["HISTORY OF PRESENT ILLNESS:", "PHYSICAL EXAMINATION:", "ASSESSMENT AND PLAN:",
            "MEDICATIONS:", "SOCIAL HISTORY:", "LABORATORY DATA:"]

TEMPLATES = [
    "Record date: {DATE}",
    "Seen on {DATE} for routine follow up.",
    "She was admitted on {DATE} and discharged on {DATE}.",
    "The patient is a {AGE} year old woman with a history of hypertension.",
    "Mr. {PATIENT} is a {AGE} year old man who presents with shortness of breath.",
    "{PATIENT} is a {AGE} yo female referred for evaluation of palpitations.",
    "Patient: {PATIENT}",
    "Seen by Dr. {DOCTOR} in the cardiology clinic.",
    "Dictated by {DOCTOR}, MD",
    "Please contact Dr. {DOCTOR} with any questions about this plan.",
    "Attending: {DOCTOR}",
    "She was transferred from {HOSPITAL} after a prolonged stay.",
    "He receives primary care at {HOSPITAL} in {CITY}.",
    "Admitted to {HOSPITAL} on {DATE} for observation.",
    "She lives in {CITY}, {STATE} {ZIP} with her husband.",
    "He recently moved to {CITY} from {COUNTRY} with his family.",
    "The patient was born in {COUNTRY} and emigrated as a teenager.",
    "She lives alone in {CITY}.",
    "He is originally from {STATE}.",
    "Mailing zip code {ZIP} confirmed at registration.",
    "He works as a {PROFESSION} and is on his feet most of the day.",
    "She is employed as a {PROFESSION} at {ORGANIZATION}.",
    "Occupation: {PROFESSION}",
    "He was recently laid off by {ORGANIZATION}.",
    "She fell while walking near {LOCATION-OTHER} last weekend.",
    "He spent the summer vacation at {LOCATION-OTHER}.",
    "MRN: {MEDICALRECORD}",
    "Medical record number {MEDICALRECORD} was verified with the patient.",
    "Order ID {IDNUM} was placed for the echocardiogram.",
    "Accession number {IDNUM}",
    "Insurance member number {HEALTHPLAN} is on file.",
    "Health plan ID: {HEALTHPLAN}",
    "Pacemaker serial {DEVICE} was interrogated today.",
    "Implanted device {DEVICE} functioning normally.",
    "Specimen barcode {BIOID} was sent to pathology.",
    "Biobank sample {BIOID} stored per protocol.",
    "Call {PHONE} to reschedule the appointment.",
    "Home phone: {PHONE}",
    "Records were faxed to {FAX} this afternoon.",
    "Fax: {FAX}",
    "She can be reached by email at {EMAIL} for results.",
    "Email: {EMAIL}",
    "Results are available on the portal at {URL} after signing in.",
    "Patient education materials: {URL}",
    "Portal username {USERNAME} was reset today.",
    "User: {USERNAME}",
]

_SLOT_RE = re.compile(r"\{([A-Z-]+)\}")


def _date(r: random.Random) -> str:
    y, m, d = r.randint(2060, 2110), r.randint(1, 12), r.randint(1, 28)
    style = r.randrange(6)
    if style == 0:
        return f"{y}-{m:02d}-{d:02d}"
    if style == 1:
        return f"{m:02d}/{d:02d}/{y}"
    if style == 2:
        return f"{m}/{d}/{y % 100:02d}"
    if style == 3:
        return f"{MONTHS[m - 1]} {d}, {y}"
    if style == 4:
        return f"{d} {MONTHS[m - 1]} {y}"
    return f"{MONTHS[m - 1]} {y}"


def _phone(r: random.Random) -> str:
    a, b, c = r.randint(201, 989), r.randint(200, 999), r.randint(0, 9999)
    return f"({a}) {b}-{c:04d}" if r.random() < 0.5 else f"{a}-{b}-{c:04d}"


def _doctor(r: random.Random) -> str:
    style = r.randrange(3)
    if style == 0:
        return r.choice(LAST)
    if style == 1:
        return f"{r.choice(FIRST)} {r.choice(LAST)}"
    return f"{r.choice(FIRST)[0]}. {r.choice(LAST)}"


FILLERS: dict[str, Callable[[random.Random], str]] = {
    "AGE": lambda r: str(r.randint(18, 97)),
    "BIOID": lambda r: f"BX{r.randint(10000, 99999)}",
    "CITY": lambda r: r.choice(CITIES),
    "COUNTRY": lambda r: r.choice(COUNTRIES),
    "DATE": _date,
    "DEVICE": lambda r: f"PM-{r.randint(1000, 9999)}{r.choice('ABCDXYZ')}",
    "DOCTOR": _doctor,
    "EMAIL": lambda r: f"{r.choice(FIRST).lower()}.{r.choice(LAST).lower()}@{r.choice(DOMAINS)}",
    "FAX": _phone,
    "HEALTHPLAN": lambda r: f"{r.choice(['BCBS', 'HP', 'MCR'])} {r.randint(100000, 999999)}",
    "HOSPITAL": lambda r: f"{r.choice(HOSPITAL_STEMS)} {r.choice(HOSPITAL_SUFFIX)}",
    "IDNUM": lambda r: f"{r.choice('ACDEFK')}{r.randint(1000000, 9999999)}",
    "LOCATION-OTHER": lambda r: r.choice(LOCATIONS_OTHER),
    "MEDICALRECORD": lambda r: f"{r.randint(1000000, 9999999)}",
    "ORGANIZATION": lambda r: r.choice(ORGANIZATIONS),
    "PATIENT": lambda r: f"{r.choice(FIRST)} {r.choice(LAST)}",
    "PHONE": _phone,
    "PROFESSION": lambda r: r.choice(PROFESSIONS),
    "STATE": lambda r: r.choice(STATES),
    "URL": lambda r: f"www.{r.choice(URL_STEMS)}.{r.choice(['org', 'com', 'net'])}",
    "USERNAME": lambda r: f"{r.choice(FIRST)[0].lower()}{r.choice(LAST).lower()}{r.randint(1, 99)}",
    "ZIP": lambda r: f"{r.randint(1000, 99999):05d}",
}


def _slots(template: str) -> set[str]:
    return set(_SLOT_RE.findall(template))


def generate_synthetic_corpus(n_docs: int, seed: int = 0, class_mix: Iterable[str] | None = None,
                              filler_range: tuple[int, int] = (10, 14),
                              phi_range: tuple[int, int] = (6, 10),
                              prefix: str = "synth") -> list[AnnotatedDocument]:
    """Generate ``n_docs`` notes whose PHI is drawn from ``class_mix``.

    Defaults to every class that can be expressed with the tag inventory.
    Each requested class is guaranteed to appear somewhere in the corpus.
    """
    mix = list(TAGGABLE_CLASSES if class_mix is None else dict.fromkeys(class_mix))
    if n_docs < 1:
        raise ConfigError("n_docs must be at least 1")
    if not mix:
        raise ConfigError("class_mix is empty")
    for cls in mix:
        if cls not in PHI_CLASSES:
            raise ConfigError(f"unknown PHI class {cls!r}")
        if cls not in FILLERS:
            raise ConfigError(f"class {cls!r} cannot be expressed with the BIO tag inventory")
    allowed = set(mix)
    usable = [t for t in TEMPLATES if _slots(t) <= allowed]
    by_class = {c: [t for t in usable if c in _slots(t)] for c in mix}
    for c, ts in by_class.items():
        if not ts:
            raise ConfigError(f"no template covers {c!r} using only classes {sorted(allowed)}")

    r = random.Random(seed)
    docs = []
    for i in range(n_docs):
        forced = [by_class[c] for j, c in enumerate(mix) if j % n_docs == i]
        phi_templates = [r.choice(ts) for ts in forced]
        extra = r.randint(*phi_range) - len(phi_templates)
        phi_templates += [r.choice(usable) for _ in range(max(0, extra))]
        fillers = r.sample(FILLER, k=min(len(FILLER), r.randint(*filler_range)))
        sentences = [(t, True) for t in phi_templates] + [(f, False) for f in fillers]
        r.shuffle(sentences)
        docs.append(_assemble(f"{prefix}{i:05d}", sentences, r))
    return docs


def _assemble(doc_id: str, sentences, r: random.Random) -> AnnotatedDocument:
    parts: list[str] = []
    spans: list[PhiSpan] = []
    length = 0

    def emit(s: str):
        nonlocal length
        parts.append(s)
        length += len(s)

    section_every = max(2, len(sentences) // 3)
    for k, (sentence, is_template) in enumerate(sentences):
        if k % section_every == 0:
            emit(("\n\n" if k else "") + r.choice(SECTIONS) + "\n")
        elif k:
            emit("\n" if r.random() < 0.3 else " ")
        if not is_template:
            emit(sentence)
            continue
        pos = 0
        for m in _SLOT_RE.finditer(sentence):
            emit(sentence[pos:m.start()])
            cls = m.group(1)
            value = FILLERS[cls](r)
            spans.append(PhiSpan(length, length + len(value), cls, value, f"P{len(spans)}"))
            emit(value)
            pos = m.end()
        emit(sentence[pos:])
    text = "".join(parts) + "\n"
    return AnnotatedDocument(doc_id, text, validate_spans(text, spans))
