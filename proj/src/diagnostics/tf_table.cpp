#include "tf_table.hpp"

namespace ivrepro::diagnostics::detail {

// 5% tF critical values c(F) for one instrument (Lee, McCrary, Moreira and
// Porter 2022, "Valid t-ratio Inference for IV"). Generated by
// tools/gen_tf_table.py: smallest c such that the test "F > F0 and |t| > c"
// has size 0.05 at |rho| = 1. Beyond the last row c = 1.96.
const std::vector<TfRow> kTfTable = {
    {3.850, 79.6739},
    {3.870, 42.9066},
    {3.900, 29.5828},
    {3.950, 21.4625},
    {4.000, 17.6283},
    {4.080, 14.2738},
    {4.162, 12.2714},
    {4.245, 10.9232},
    {4.330, 9.9297},
    {4.416, 9.1684},
    {4.505, 8.5497},
    {4.595, 8.0453},
    {4.687, 7.6201},
    {4.780, 7.2593},
    {4.876, 6.9423},
    {4.973, 6.6666},
    {5.073, 6.4193},
    {5.174, 6.2001},
    {5.278, 6.0005},
    {5.383, 5.8211},
    {5.491, 5.6558},
    {5.601, 5.5042},
    {5.713, 5.3646},
    {5.827, 5.2353},
    {5.944, 5.1143},
    {6.063, 5.0016},
    {6.184, 4.8962},
    {6.308, 4.7967},
    {6.434, 4.7033},
    {6.562, 4.6153},
    {6.694, 4.5311},
    {6.828, 4.4515},
    {6.964, 4.3761},
    {7.103, 4.3042},
    {7.245, 4.2354},
    {7.390, 4.1696},
    {7.538, 4.1065},
    {7.689, 4.0461},
    {7.843, 3.9881},
    {8.000, 3.9324},
    {8.160, 3.8789},
    {8.323, 3.8275},
    {8.489, 3.7781},
    {8.659, 3.7302},
    {8.832, 3.6841},
    {9.009, 3.6395},
    {9.189, 3.5965},
    {9.373, 3.5548},
    {9.560, 3.5146},
    {9.751, 3.4757},
    {9.946, 3.4380},
    {10.145, 3.4014},
    {10.348, 3.3660},
    {10.555, 3.3316},
    {10.766, 3.2983},
    {10.982, 3.2659},
    {11.201, 3.2345},
    {11.425, 3.2040},
    {11.654, 3.1743},
    {11.887, 3.1455},
    {12.125, 3.1175},
    {12.367, 3.0903},
    {12.614, 3.0638},
    {12.867, 3.0379},
    {13.124, 3.0128},
    {13.387, 2.9882},
    {13.654, 2.9645},
    {13.927, 2.9412},
    {14.206, 2.9185},
    {14.490, 2.8964},
    {14.780, 2.8749},
    {15.075, 2.8539},
    {15.377, 2.8333},
    {15.685, 2.8133},
    {15.998, 2.7938},
    {16.318, 2.7747},
    {16.645, 2.7560},
    {16.977, 2.7378},
    {17.317, 2.7200},
    {17.663, 2.7026},
    {18.017, 2.6855},
    {18.377, 2.6689},
    {18.744, 2.6527},
    {19.119, 2.6367},
    {19.502, 2.6211},
    {19.892, 2.6059},
    {20.290, 2.5910},
    {20.695, 2.5764},
    {21.109, 2.5621},
    {21.532, 2.5481},
    {21.962, 2.5344},
    {22.401, 2.5210},
    {22.849, 2.5078},
    {23.306, 2.4949},
    {23.773, 2.4822},
    {24.248, 2.4699},
    {24.733, 2.4577},
    {25.228, 2.4458},
    {25.732, 2.4341},
    {26.247, 2.4227},
    {26.772, 2.4114},
    {27.307, 2.4004},
    {27.853, 2.3896},
    {28.410, 2.3790},
    {28.979, 2.3686},
    {29.558, 2.3584},
    {30.149, 2.3483},
    {30.752, 2.3385},
    {31.367, 2.3288},
    {31.995, 2.3193},
    {32.635, 2.3100},
    {33.287, 2.3008},
    {33.953, 2.2918},
    {34.632, 2.2829},
    {35.325, 2.2743},
    {36.031, 2.2657},
    {36.752, 2.2573},
    {37.487, 2.2491},
    {38.237, 2.2410},
    {39.001, 2.2330},
    {39.781, 2.2251},
    {40.577, 2.2174},
    {41.389, 2.2099},
    {42.216, 2.2024},
    {43.061, 2.1951},
    {43.922, 2.1879},
    {44.800, 2.1808},
    {45.696, 2.1738},
    {46.610, 2.1669},
    {47.542, 2.1602},
    {48.493, 2.1535},
    {49.463, 2.1470},
    {50.452, 2.1405},
    {51.461, 2.1342},
    {52.491, 2.1280},
    {53.541, 2.1218},
    {54.611, 2.1158},
    {55.704, 2.1098},
    {56.818, 2.1040},
    {57.954, 2.0982},
    {59.113, 2.0925},
    {60.295, 2.0869},
    {61.501, 2.0814},
    {62.731, 2.0760},
    {63.986, 2.0706},
    {65.266, 2.0654},
    {66.571, 2.0602},
    {67.902, 2.0551},
    {69.260, 2.0500},
    {70.646, 2.0451},
    {72.058, 2.0402},
    {73.500, 2.0354},
    {74.970, 2.0306},
    {76.469, 2.0259},
    {77.998, 2.0213},
    {79.558, 2.0168},
    {81.150, 2.0123},
    {82.773, 2.0079},
    {84.428, 2.0035},
    {86.117, 1.9992},
    {87.839, 1.9950},
    {89.596, 1.9908},
    {91.388, 1.9867},
    {93.215, 1.9826},
    {95.080, 1.9786},
    {96.981, 1.9747},
    {98.921, 1.9708},
    {100.899, 1.9669},
    {102.917, 1.9598},
    {104.700, 1.9598},
};

}  // namespace ivrepro::diagnostics::detail
