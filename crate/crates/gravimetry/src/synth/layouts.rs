//! Frozen survey station layouts.
//!
//! Each layout is a stratified-random draw over the 15 km × 15 km window:
//! the window is tiled into equal cells, a fixed subset of cells is kept
//! (45 of 7×7, 73 of 9×9) and one station is placed uniformly inside each
//! kept cell. The draws were made once and are frozen here so survey
//! generation needs no runtime randomness.

pub(crate) const EXAMPLE1_STATIONS: [(f64, f64); 45] = [
    (0.3607579270867587, 1.2843363608247362),
    (4.252445252577499, 1.4812572793240077),
    (5.917002922151281, 1.3524160886605778),
    (6.90123199266438, 1.2508338125442555),
    (12.324349854149133, 1.873185884357868),
    (0.3691303931985686, 3.0971408001928538),
    (3.3226049414549657, 2.354763604094749),
    (5.219105405365321, 4.250214567372848),
    (8.605958440654124, 4.117518953894479),
    (11.42803856033337, 3.440141760408613),
    (13.566103713789959, 2.7607829074342876),
    (0.6989926280090593, 4.67831944955547),
    (2.15888977141185, 5.411217809173088),
    (5.3187922381103405, 4.882213045925489),
    (7.6237681650292135, 6.032446592877518),
    (9.81151948546454, 5.3839288995830525),
    (12.084316133470036, 6.245810549129952),
    (13.846454703137017, 4.501976860561492),
    (0.6238503706250157, 7.4026438527687946),
    (3.4575188042143257, 7.266085779448262),
    (4.810383732289006, 8.031426780325551),
    (7.184009902471742, 7.093488423569899),
    (10.171183526238485, 6.834188213247168),
    (12.171716973077858, 7.1906331194758675),
    (14.123859108905261, 7.027420381373866),
    (1.956331171993261, 8.931771251850414),
    (3.9173957653350233, 8.57247693853501),
    (5.059758531460109, 9.519003438335547),
    (8.495774345474642, 9.371660686286164),
    (9.689279501183762, 8.58726150659052),
    (10.90168141914718, 9.156618860980892),
    (14.094843510327223, 9.828813773405601),
    (1.9972702567097442, 12.036853777229219),
    (2.663316216740698, 11.555497893457725),
    (6.1685988861250705, 12.390223865863502),
    (6.479720462991527, 12.763244031566952),
    (10.006382277618997, 11.838084304272625),
    (12.651269526383635, 11.4674506881156),
    (13.083583151940765, 11.152901715909895),
    (2.913948673411582, 14.716057717316431),
    (6.291600442748627, 14.366501633981791),
    (8.191065573404716, 14.767914958909701),
    (10.333583785312003, 12.882203601051158),
    (12.53408210912904, 13.319091687264164),
    (13.10077391582694, 13.209957624193004),
];

pub(crate) const EXAMPLE2_STATIONS: [(f64, f64); 73] = [
    (1.6128766443301827, 0.0450937363969615),
    (4.232318751530618, 0.4239265334231583),
    (6.083001410465582, 0.6076351407276898),
    (7.495998526061409, 1.2794500206076618),
    (9.217827180372923, 0.6255052471702415),
    (10.449624268312531, 1.5924379007894505),
    (12.58915659277774, 0.10778614628767391),
    (13.830494779317302, 1.4549656953295966),
    (0.2959442530118876, 3.0886572212785572),
    (2.032297258212596, 2.0225674591704217),
    (3.336324650334066, 3.070984127526559),
    (7.524374418462848, 2.11617847802529),
    (8.568479795711411, 1.9422181076737677),
    (10.835754541461665, 2.613977109391376),
    (13.466888123786482, 2.4400054215397677),
    (1.4369235035904484, 4.667538382539034),
    (2.6301969948901527, 3.8058989701750496),
    (4.305835494501282, 4.069544575169714),
    (5.504518883690013, 3.9550553945382547),
    (6.785479481881935, 4.318761408701535),
    (11.306067021901146, 3.837138528251407),
    (12.937216611014344, 3.5005280045896945),
    (14.976011639560157, 4.85466679102082),
    (0.3242361298594665, 5.388890427728965),
    (2.968052760737951, 5.627151708227983),
    (3.5834906217757267, 5.784316454168841),
    (6.182313138841761, 6.577238160773281),
    (7.814778854413541, 5.537369262189981),
    (9.684385565803042, 6.0198925162040124),
    (11.214053565752062, 6.305260449595682),
    (12.918086877784276, 5.39362408712244),
    (13.92034052506863, 6.613372389709436),
    (1.2981436857608089, 6.774468132520619),
    (1.6761601981137497, 8.13713738863839),
    (3.5942488747618784, 7.540016849609645),
    (5.438872481942941, 7.829921088387589),
    (6.693784582362176, 8.21533882442523),
    (9.074978482352646, 7.0926469240363845),
    (10.665399660342052, 8.180937493754072),
    (12.484953457233988, 6.855133962027886),
    (13.654658513639975, 8.037640278170748),
    (0.377939960199975, 8.976860646303974),
    (2.550326208047375, 9.015919150866734),
    (4.237635347551375, 9.491938500863613),
    (6.093602216713538, 9.951344025528977),
    (6.939266749358555, 9.322401641231217),
    (9.566263614865582, 9.034147376764977),
    (11.023233055754991, 9.908793272447785),
    (12.394019899465063, 9.201393162519238),
    (14.988383568525004, 8.553277562580652),
    (0.35177785890365043, 10.334979727133273),
    (2.366735193187221, 10.217161926853889),
    (3.744099321807065, 11.422184827747145),
    (6.064843309654861, 10.996124032097974),
    (7.74706233731484, 10.360325172519758),
    (11.201683992296516, 10.664440860317015),
    (12.036075201415443, 11.134960620176773),
    (2.562601530512526, 12.266017405035786),
    (3.546549109428357, 12.32104312251489),
    (6.600721397210235, 13.139011885048298),
    (7.6977108766103015, 13.160000494467331),
    (10.335645778116303, 12.04127916329167),
    (13.27708279268731, 13.033708777229197),
    (13.485154069578988, 12.583523863274358),
    (0.40396942985675754, 13.781648531266564),
    (3.2178957384631297, 13.837607429570763),
    (4.416506541190457, 14.554974013240493),
    (6.334334208389675, 14.049225754657),
    (8.163812836957911, 14.911819379870414),
    (8.525846990565181, 13.538770813233842),
    (10.560563114218093, 13.415973780209505),
    (12.517104235582888, 14.351143574747386),
    (13.8532060699983, 14.484619072343303),
];
