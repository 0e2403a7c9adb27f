7 20
0.7544993124534437 0.67615092403922916 0.13759739774719382 0.074432226138422597 0.36532820322161585 0.90709066894488966 0.45166912902361012 0.20811813087019315 0.33155889048612741 0.86019882553311855 0.53719857061379717 0.24686863363624123 0.11275384940348776 0.6857226397605114 0.50779395097828683 0.81111399057756595 0.37970727287020456 0.15212932691876524 0.72104255945620199 0.14182031881548629
0.59677943107904396 0.20178374020512291 0.54127238647519305 0.48898006780977787 0.69896175159129503 0.04152266288177997 0.68329124699925536 0.69967194081077366 0.40648489543419253 0.69852629230629926 0.15982306001462943 0.82713794963421372 0.61876401345265364 0.078795283347592115 0.75601142308271874 0.61770518178039868 0.25296376248042662 0.8562996562934333 0.17446090172589057 0.054790178179089821
0.32875934735186474 0.025946710146083296 0.0091294692682564182 0.32312486917691752 0.27582967141365244 0.53391733281409626 0.98728674695487673 0.49766248501201549 0.90699138959941772 0.6090268617693273 0.18901848117037834 0.42439596104318655 0.99657744678842686 0.6418848833827685 0.78438139963295817 0.78282237768580032 0.56868417412353534 0.17519314201014691 0.16325957526104584 0.87005026798963458
0.34816844818224812 0.42435800938037727 0.35700629610635382 0.067376276694867787 0.21541779817854956 0.072730213047392134 0.25309236160021431 0.043299914259636751 0.75529860019325801 0.75042424584880107 0.79572272604964733 0.27114685802728722 0.59038727105441724 0.78830104412931357 0.2998634540127586 0.37811781003558098 0.3711138907537973 0.80825727810786119 0.86389499380259438 0.94500640408000014
0.68092168807745967 0.76568494372586449 0.6867304519978904 0.073323278993667529 0.34711520034847276 0.45250337567431786 0.81034251613820241 0.48078055458207114 0.63911840311722667 0.57208107659332852 0.70267449125096526 0.60686794344995321 0.15206684590379449 0.25290969151167575 0.76323857530868588 0.7032204211923998 0.80640220718525712 0.7328815634140895 0.83060571130058536 0.10483225146885378
0.81117195405915821 0.14185778444348462 0.4543985181975253 0.84338881123378351 0.50756085334303269 0.46274460787062532 0.90942642668283558 0.58598462022727715 0.7006627000425677 0.028182334017363253 0.48408113616019877 0.75084214135345351 0.46755642748114767 0.41006355850857423 0.64223370607276531 0.27323724112034065 0.79678485179112035 0.82583743555405209 0.54274775959281918 0.94941682468509525
0.3641629111838488 0.62091523534586246 0.67400744784488309 0.4879810866737696 0.81786527844295753 0.61395081265798945 0.33893357451354478 0.15243765161311529 0.8928337797322502 0.67478190287670325 0.7068510145940764 0.90409411564510767 0.49361594678476139 0.48495697991409836 0.93377703148676305 0.32078998913108303 0.12215828028048359 0.25360540330872428 0.021193545649177969 0.24660354479183466
