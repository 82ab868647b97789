# 领域类型与场景生成
