"""Published coefficient tables for the shipped functions.

Coefficients are kept as their full decimal expansions; each one is the exact
value of a binary64 number, so conversion with ``float`` is lossless.
"""

from __future__ import annotations

import math

from crpoly.polygen import CoefficientSet, Piece, PolynomialSpec

ODD = {k: tuple(range(1, k + 1, 2)) for k in (1, 3, 5, 7, 9, 15)}
EVEN = {k: tuple(range(0, k + 1, 2)) for k in (6, 8)}
DENSE = {k: tuple(range(k + 1)) for k in (4, 6)}
INF = math.inf

# (format, function) -> list of (Piece, [decimal coefficient strings])
_TABLES = {
    ("bfloat16", "ln"): [
        (
            Piece(INF, True, ODD[7]),
            [
                "2.885102725620722008414986703428439795970916748046875",
                "0.9749438269300123582894457285874523222446441650390625",
                "0.391172520217394070751737444879836402833461761474609375",
                "1.2722152807088404902202682933420874178409576416015625",
            ],
        )
    ],
    ("bfloat16", "log2"): [
        (
            Piece(INF, True, ODD[5]),
            [
                "2.885725930059220178947043677908368408679962158203125",
                "0.9477394346709135941608792563783936202526092529296875",
                "0.7307375337145580740383365991874597966670989990234375",
            ],
        )
    ],
    ("bfloat16", "log10"): [
        (
            Piece(INF, True, ODD[5]),
            [
                "2.88545942229525831379532974096946418285369873046875",
                "0.956484867363945223672772044665180146694183349609375",
                "0.6710954935542725596775426311069168150424957275390625",
            ],
        )
    ],
    ("bfloat16", "exp"): [
        (
            Piece(INF, True, DENSE[4]),
            [
                "1.0000095976211798021182630691328085958957672119140625",
                "0.69279247181322956006255253669223748147487640380859375",
                "0.242560224581628236517616414857911877334117889404296875",
                "5.014719237694532927296364732683287002146244049072265625e-2",
                "1.45139853027161404297462610202273936010897159576416015625e-2",
            ],
        )
    ],
    ("bfloat16", "exp2"): [
        (
            Piece(INF, True, DENSE[4]),
            [
                "1.0000091388165410766220020377659238874912261962890625",
                "0.69265463004053107187729665383812971413135528564453125",
                "0.2437159431324379121885925769674940966069698333740234375",
                "4.8046547014740259573528646797058172523975372314453125e-2",
                "1.557767964117490015751865684023869107477366924285888671875e-2",
            ],
        )
    ],
    ("bfloat16", "exp10"): [
        (
            Piece(INF, True, DENSE[4]),
            [
                "1.0000778485054981903346060789772309362888336181640625",
                "0.69179740083422547325397999884444288909435272216796875",
                "0.2459833280009494360651700617381720803678035736083984375",
                "4.5758952998196537886865797872815164737403392791748046875e-2",
                "1.63907658064124488184187811157244141213595867156982421875e-2",
            ],
        )
    ],
    ("bfloat16", "sqrt"): [
        (
            Piece(INF, True, DENSE[4]),
            [
                "0.37202139260816802224240973373525775969028472900390625",
                "0.7923315194006106398916244870633818209171295166015625",
                "-0.199230719933062794257949690290843136608600616455078125",
                "3.800384608453956369888970812098705209791660308837890625e-2",
                "-3.0848915765425755954043385287377532222308218479156494140625e-3",
            ],
        )
    ],
    ("bfloat16", "cbrt"): [
        (
            Piece(INF, True, DENSE[6]),
            [
                "0.56860957346246798760347473944420926272869110107421875",
                "0.5752913905623990853399618572439067065715789794921875",
                "-0.180364291120356845521399691278929822146892547607421875",
                "4.3868412288261666998057108912689727731049060821533203125e-2",
                "-6.5208421736825845915763721905022975988686084747314453125e-3",
                "5.241080546145838146843143334763226448558270931243896484375e-4",
                "-1.7372029717703960593165601888898663673899136483669281005859375e-5",
            ],
        )
    ],
    ("bfloat16", "sinpi"): [
        (Piece(6.011962890625e-3, True, ODD[1]), ["3.14159292035398163278614447335712611675262451171875"]),
        (
            Piece(0.5, True, ODD[7]),
            [
                "3.141515487020253072358855206402949988842010498046875",
                "-5.16405991738943459523625278961844742298126220703125",
                "2.50692180297728217652775128954090178012847900390625",
                "-0.443008519856437021910977591687696985900402069091796875",
            ],
        ),
    ],
    ("bfloat16", "cospi"): [
        (Piece(1.98974609375e-2, True, (0,)), ["1.00390625"]),
        (
            Piece(0.5, False, EVEN[6]),
            [
                "0.99997996859304827399483883709763176739215850830078125",
                "-4.9324802047472200428046562592498958110809326171875",
                "4.02150995405109146219047033810056746006011962890625",
                "-1.1640167711700171171429474270553328096866607666015625",
            ],
        ),
        (Piece(0.5, True, (0,)), ["0.0"]),
    ],
    ("posit16", "ln"): [
        (
            Piece(INF, True, ODD[9]),
            [
                "2.8853901812623536926594169926829636096954345703125",
                "0.96177728824005104257821585633791983127593994140625",
                "0.57802192858859535729010303839459083974361419677734375",
                "0.39449243216490248453709455134230665862560272216796875",
                "0.45254178489671204044242358577321283519268035888671875",
            ],
        )
    ],
    ("posit16", "log2"): [
        (
            Piece(INF, True, ODD[9]),
            [
                "2.88539115994917327867597123258747160434722900390625",
                "0.9616405555684151007511673014960251748561859130859375",
                "0.5827497609092706642996972732362337410449981689453125",
                "0.336729567454907396939489672149647958576679229736328125",
                "0.68022527114824737903830964569351635873317718505859375",
            ],
        )
    ],
    ("posit16", "log10"): [
        (
            Piece(INF, True, ODD[9]),
            [
                "2.885392110906054075059046226670034229755401611328125",
                "0.96158476800643521986700079651200212538242340087890625",
                "0.5837756666515827586039222296676598489284515380859375",
                "0.330016589138880600540204568460467271506786346435546875",
                "0.691650888349585102332639507949352264404296875",
            ],
        )
    ],
    ("posit16", "sqrt"): [
        (
            Piece(2.14599609375, True, DENSE[6]),
            [
                "0.269593592709484630720595532693550921976566314697265625",
                "1.129000996028148851024752730154432356357574462890625",
                "-0.64843843364755160418866353211342357099056243896484375",
                "0.3530868073027828568655195340397767722606658935546875",
                "-0.127171841275129426929169085269677452743053436279296875",
                "2.62819293630375920567399106175798806361854076385498046875e-2",
                "-2.3530402643644897538177662710268123191781342029571533203125e-3",
            ],
        ),
        (
            Piece(INF, True, DENSE[6]),
            [
                "0.409156298855834987815427439272752963006496429443359375",
                "0.74313621747255442784307888359762728214263916015625",
                "-0.1842527001546831189049413524116971530020236968994140625",
                "4.305139568476913647376846938641392625868320465087890625e-2",
                "-6.6014424010839810319506426594671211205422878265380859375e-3",
                "5.74776888286255573622118841825567869818769395351409912109375e-4",
                "-2.1374405303079146056961790112183052769978530704975128173828125e-5",
            ],
        ),
    ],
    ("posit16", "sinpi"): [
        (Piece(2.52532958984375e-3, True, ODD[1]), ["3.141577060931899811890843920991756021976470947265625"]),
        (
            Piece(0.5, True, ODD[9]),
            [
                "3.141593069399674309494230328709818422794342041015625",
                "-5.1677486367595673044661452877335250377655029296875",
                "2.55098424541712009983029929571785032749176025390625",
                "-0.60547119473342603246379667325527407228946685791015625",
                "9.47599641221426869375221713198698125779628753662109375e-2",
            ],
        ),
    ],
    ("posit16", "cospi"): [
        (Piece(3.509521484375e-3, True, (0,)), ["1.0001220703125"]),
        (
            Piece(0.5, False, EVEN[8]),
            [
                "1.000000009410458634562246515997685492038726806640625",
                "-4.93479863229652071510145106003619730472564697265625",
                "4.05853647916781223869975292473100125789642333984375",
                "-1.3327362938689424343152722940430976450443267822265625",
                "0.2215338495769658688772096866159699857234954833984375",
            ],
        ),
        (Piece(0.5, True, (0,)), ["0.0"]),
    ],
    ("binary32", "log2"): [
        (
            Piece(INF, True, ODD[15]),
            [
                "2.885390081777253090677959335152991116046905517578125",
                "0.9617966943187539197168689497630111873149871826171875",
                "0.57707795150992868826733683818019926548004150390625",
                "0.41220281933294511400589499316993169486522674560546875",
                "0.320462962813822971330779409981914795935153961181640625",
                "0.264665103135787116439558985803159885108470916748046875",
                "0.1996122250113066820542684354222728870809078216552734375",
                "0.298387164422755202242143468538415618240833282470703125",
            ],
        )
    ],
}

SHIPPED = tuple(sorted(_TABLES))


def table_strings(fmt: str, function: str):
    """The raw decimal strings, piece by piece."""
    return [list(strings) for _, strings in _TABLES[(fmt, function)]]


def published_coefficients(fmt: str, function: str) -> CoefficientSet:
    try:
        entries = _TABLES[(fmt, function)]
    except KeyError:
        raise KeyError(f"no published coefficients for {function} on {fmt}") from None
    spec = PolynomialSpec(tuple(p for p, _ in entries))
    return CoefficientSet.from_strings(spec, [s for _, s in entries], {"source": "published"})
